"""Term-importance tables that steer the directed operators.

The primary table is over term signatures. Token-level importance is the
marginal: the summed probability of every term containing the token.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .genotype import StructuralRules, TermVocabulary, Token, generate_term

__all__ = [
    "REGIMES",
    "BOOST_FACTORS",
    "CountTable",
    "ImportanceTable",
    "EmptySupportError",
    "estimate_counts",
    "build_distribution",
    "sample_term",
    "sample_token",
    "save_distribution",
    "load_distribution",
]

REGIMES = ("fixed", "biased", "highly_biased", "uniform")
BOOST_FACTORS = {"fixed": 1.0, "biased": 1.2, "highly_biased": 2.0}


class EmptySupportError(ValueError):
    pass


@dataclass(frozen=True)
class CountTable:
    counts: dict[str, float]

    @property
    def total(self) -> float:
        return float(sum(self.counts.values()))

    def fractions(self) -> dict[str, float]:
        total = self.total
        return {s: c / total for s, c in self.counts.items()}


def _split(sig: str) -> list[str]:
    return sig.split("*")


@dataclass(frozen=True)
class ImportanceTable:
    probs: dict[str, float]
    token_marginal: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.probs:
            raise ValueError("importance table is empty")
        values = np.fromiter(self.probs.values(), dtype=float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("probabilities must be finite and nonnegative")
        total = values.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        if not self.token_marginal:
            object.__setattr__(self, "token_marginal", _marginal(self.probs))
        sigs = list(self.probs)
        object.__setattr__(self, "_sigs", sigs)
        object.__setattr__(self, "_p", values)
        toks = list(self.token_marginal)
        object.__setattr__(self, "_toks", toks)
        object.__setattr__(self, "_tp", np.fromiter(self.token_marginal.values(), dtype=float))

    @classmethod
    def from_probs(cls, probs: Mapping[str, float], vocabulary: Iterable[str] | None = None):
        """Complete a partial table: unlisted vocabulary terms share the residual mass equally."""
        probs = {str(k): float(v) for k, v in probs.items()}
        if vocabulary is None:
            full = dict(probs)
        else:
            vocab = list(vocabulary)
            unknown = [s for s in probs if s not in set(vocab)]
            if unknown:
                raise ValueError(f"signatures not in vocabulary: {unknown}")
            missing = [s for s in vocab if s not in probs]
            given = sum(probs.values())
            if given > 1.0 + 1e-9:
                raise ValueError(f"listed probabilities sum to {given} > 1")
            share = max(0.0, 1.0 - given) / len(missing) if missing else 0.0
            full = {s: probs.get(s, share) for s in sorted(vocab)}
        total = sum(full.values())
        if total <= 0:
            raise ValueError("table has no probability mass")
        return cls({s: v / total for s, v in full.items()})

    def max_token_importance(self, names: Iterable[str]) -> float:
        return max(self.token_marginal.get(n, 0.0) for n in names)


def _marginal(probs: Mapping[str, float]) -> dict[str, float]:
    marg: dict[str, float] = {}
    for sig, p in probs.items():
        for name in set(_split(sig)):
            marg[name] = marg.get(name, 0.0) + p
    total = sum(marg.values())
    return {k: v / total for k, v in sorted(marg.items())}


def estimate_counts(
    runs: int,
    draws_per_run: int,
    rng: np.random.Generator,
    vocabulary: TermVocabulary,
    families: Mapping[str, tuple[Token, ...]],
    max_factors: int = 2,
    rules: StructuralRules | None = None,
) -> CountTable:
    """Monte-Carlo term frequencies of the classical generator (no uniqueness check)."""
    if runs < 1 or draws_per_run < 1:
        raise ValueError("runs and draws_per_run must be at least 1")
    counts = {s: 0.0 for s in vocabulary.signatures}
    for _ in range(runs):
        for _ in range(draws_per_run):
            sig = generate_term(rng, max_factors, families, rules=rules).signature
            if sig not in counts:
                raise ValueError(f"generator produced {sig!r}, which is outside the vocabulary")
            counts[sig] += 1.0
    return CountTable(counts)


def build_distribution(
    counts: CountTable, regime: str, boost_terms: Iterable[str] = ()
) -> ImportanceTable:
    """Turn term counts into one of the four importance regimes.

    ``fixed`` normalizes the counts, ``biased`` and ``highly_biased`` first
    multiply the counts of ``boost_terms`` by 1.2 and 2.0, and ``uniform``
    ignores the counts.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; valid: {', '.join(REGIMES)}")
    boost = set(boost_terms)
    unknown = boost - set(counts.counts)
    if unknown:
        raise ValueError(f"boost terms not in vocabulary: {sorted(unknown)}")
    if regime == "uniform":
        n = len(counts.counts)
        if n == 0:
            raise ValueError("empty count table")
        return ImportanceTable({s: 1.0 / n for s in counts.counts})
    if regime in ("biased", "highly_biased") and not boost:
        raise ValueError(f"regime {regime!r} needs a nonempty set of boost terms")
    if counts.total <= 0:
        raise ValueError("count table total is zero")
    factor = BOOST_FACTORS[regime]
    adjusted = {s: c * factor if s in boost else c for s, c in counts.counts.items()}
    total = sum(adjusted.values())
    return ImportanceTable({s: c / total for s, c in adjusted.items()})


def _sample(names, weights, rng, exclude, uniform_fallback) -> str:
    w = weights.copy()
    if exclude:
        keep = np.array([n not in exclude for n in names])
        if not keep.any():
            raise EmptySupportError("every entry is excluded")
        w[~keep] = 0.0
    else:
        keep = None
    total = w.sum()
    if total <= 0:
        if not uniform_fallback:
            raise EmptySupportError("no probability mass outside the excluded entries")
        w = np.ones(len(names)) if keep is None else keep.astype(float)
        total = w.sum()
    cumulative = np.cumsum(w)
    idx = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
    idx = min(idx, len(names) - 1)
    while w[idx] == 0:
        idx -= 1
    return names[idx]


def sample_term(
    table: ImportanceTable,
    rng: np.random.Generator,
    exclude: Iterable[str] = (),
    uniform_fallback: bool = False,
) -> str:
    """Draw a signature with probability proportional to its importance outside ``exclude``.

    With ``uniform_fallback``, zero remaining mass gives a uniform draw over the
    non-excluded entries instead of ``EmptySupportError``.
    """
    return _sample(table._sigs, table._p, rng, set(exclude), uniform_fallback)


def sample_token(
    table: ImportanceTable,
    rng: np.random.Generator,
    exclude: Iterable[str] = (),
    uniform_fallback: bool = False,
) -> str:
    return _sample(table._toks, table._tp, rng, set(exclude), uniform_fallback)


def save_distribution(table: ImportanceTable, path) -> None:
    Path(path).write_text(json.dumps({s: p for s, p in table.probs.items()}, indent=2) + "\n")


def load_distribution(path, vocabulary: Iterable[str] | None = None) -> ImportanceTable:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("distribution file must hold a JSON object {signature: probability}")
    return ImportanceTable.from_probs(data, vocabulary)
