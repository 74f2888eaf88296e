"""Tokens, terms and equation models, plus rule-constrained term generation.

A term is a commutative product of tokens and is identified by its canonical
signature: token names sorted lexicographically and joined with ``*``.
"""

from __future__ import annotations

import bisect
import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Token",
    "Term",
    "EquationModel",
    "StructuralRules",
    "TermVocabulary",
    "VocabularyExhausted",
    "SearchSpace",
    "token_from_name",
    "group_families",
    "canonical_signature",
    "generate_term",
    "enumerate_vocabulary",
    "strip_common_factor",
]

_DERIV = re.compile(r"^d(?:\^(\d+))?u/d([xt])(?:\^(\d+))?$")


class VocabularyExhausted(RuntimeError):
    """No admissible term is left outside the excluded set."""


@dataclass(frozen=True, order=True)
class Token:
    name: str
    family: str = field(default="other", compare=False)
    # derivative orders (x_order, t_order); empty for non-derivative tokens
    parameters: tuple[int, ...] = field(default=(), compare=False)

    @property
    def time_order(self) -> int:
        return self.parameters[1] if len(self.parameters) == 2 else 0


def token_from_name(name: str) -> Token:
    """Build a token from a field name such as ``u``, ``du/dx`` or ``d^3u/dx^3``."""
    if "*" in name:
        raise ValueError(f"token names may not contain '*': {name!r}")
    if name == "u":
        return Token(name, "field", (0, 0))
    if name == "forcing":
        return Token(name, "forcing", ())
    m = _DERIV.match(name)
    if m:
        order = int(m.group(1) or 1)
        if m.group(3) is not None and int(m.group(3)) != order:
            raise ValueError(f"inconsistent derivative orders in {name!r}")
        params = (order, 0) if m.group(2) == "x" else (0, order)
        return Token(name, "derivatives", params)
    return Token(name, "other", ())


def group_families(tokens: Iterable[Token]) -> dict[str, tuple[Token, ...]]:
    families: dict[str, list[Token]] = {}
    for tok in sorted(set(tokens)):
        families.setdefault(tok.family, []).append(tok)
    return {k: tuple(v) for k, v in sorted(families.items())}


def canonical_signature(tokens: Iterable, max_factors: int | None = None) -> str:
    names = sorted(t.name if isinstance(t, Token) else str(t) for t in tokens)
    if not names:
        raise ValueError("a term needs at least one token")
    if max_factors is not None and len(names) > max_factors:
        raise ValueError(f"term has {len(names)} tokens, maximum is {max_factors}")
    return "*".join(names)


@dataclass(frozen=True)
class Term:
    tokens: tuple[Token, ...]

    @classmethod
    def of(cls, tokens: Iterable[Token]) -> "Term":
        return cls(tuple(sorted(tokens)))

    @property
    def signature(self) -> str:
        return "*".join(t.name for t in self.tokens)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return self.signature


def strip_common_factor(terms: Sequence[Term]) -> list[Term] | None:
    """Divide every term by the token product they all share.

    ``u*a + u*b = 0`` carries no more information than ``a + b = 0``. Returns
    None when there are fewer than two terms, no shared factor, or when
    dividing would leave some term empty.
    """
    if len(terms) < 2:
        return None
    common = Counter(terms[0].tokens)
    for term in terms[1:]:
        common &= Counter(term.tokens)
    if not common:
        return None
    reduced = []
    for term in terms:
        rest = Counter(term.tokens) - common
        if not rest:
            return None
        reduced.append(Term.of(rest.elements()))
    return reduced


@dataclass(frozen=True)
class StructuralRules:
    """Admissibility checks applied to terms and models.

    ``max_time_derivatives=None`` disables the time-derivative limit.
    """

    max_time_derivatives: int | None = 1
    forbid_forcing_powers: bool = True
    min_terms: int = 2

    @classmethod
    def none(cls) -> "StructuralRules":
        return cls(max_time_derivatives=None, forbid_forcing_powers=False, min_terms=1)

    def can_extend(self, partial: Sequence[Token], token: Token) -> bool:
        if self.max_time_derivatives is None or token.time_order == 0:
            return True
        used = sum(1 for t in partial if t.time_order > 0)
        return used < self.max_time_derivatives

    def admits(self, tokens: Sequence[Token]) -> bool:
        if self.max_time_derivatives is not None:
            if sum(1 for t in tokens if t.time_order > 0) > self.max_time_derivatives:
                return False
        if self.forbid_forcing_powers and len(tokens) > 1:
            if all(t.family == "forcing" for t in tokens):
                return False
        return True

    def admits_model(self, terms: Sequence[Term]) -> bool:
        sigs = [t.signature for t in terms]
        return (
            len(set(sigs)) == len(sigs)
            and len(sigs) >= self.min_terms
            and all(self.admits(t.tokens) for t in terms)
        )


@dataclass(frozen=True)
class TermVocabulary:
    terms: tuple[Term, ...]

    @property
    def signatures(self) -> list[str]:
        return [t.signature for t in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __contains__(self, signature: str) -> bool:
        return signature in self._index

    def get(self, signature: str) -> Term:
        return self.terms[self._index[signature]]

    @property
    def _index(self) -> dict[str, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {t.signature: i for i, t in enumerate(self.terms)}
            object.__setattr__(self, "_idx", idx)
        return idx


@lru_cache(maxsize=256)
def _enumerate(tokens: tuple[Token, ...], max_factors: int, rules: StructuralRules) -> TermVocabulary:
    terms = {}
    for size in range(1, max_factors + 1):
        for combo in itertools.combinations_with_replacement(tokens, size):
            if rules.admits(combo):
                term = Term.of(combo)
                terms[term.signature] = term
    return TermVocabulary(tuple(terms[s] for s in sorted(terms)))


def enumerate_vocabulary(
    tokens: Iterable[Token], max_factors: int, rules: StructuralRules | None = None
) -> TermVocabulary:
    """All admissible token multisets of size 1..max_factors, sorted by signature."""
    tokens = tuple(sorted(set(tokens)))
    if not tokens:
        raise ValueError("token set is empty")
    if max_factors < 1:
        raise ValueError("max_factors must be at least 1")
    return _enumerate(tokens, int(max_factors), rules or StructuralRules())


def _pick(rng: np.random.Generator, cumulative: list[float]) -> int:
    return bisect.bisect_right(cumulative, rng.random() * cumulative[-1])


def generate_term(
    rng: np.random.Generator,
    max_factors: int,
    families: dict[str, Sequence[Token]],
    existing: Iterable[str] = (),
    rules: StructuralRules | None = None,
    max_attempts: int = 1000,
) -> Term:
    """Draw a term with the family-proportional generator.

    The factor count is uniform on 1..max_factors. Each factor comes from a family
    chosen with probability proportional to its number of admissible tokens, then
    uniformly within that family. Draws repeat until the term is admissible and
    its signature is not in ``existing``.
    """
    if max_factors < 1:
        raise ValueError("max_factors must be at least 1")
    rules = rules or StructuralRules()
    existing = set(existing)
    fam_lists = [tuple(f) for f in families.values() if f]
    if existing:
        all_tokens = tuple(t for f in fam_lists for t in f)
        vocab = enumerate_vocabulary(all_tokens, max_factors, rules)
        if all(s in existing for s in vocab.signatures):
            raise VocabularyExhausted("every admissible term is already present")

    for _ in range(max_attempts):
        n = int(rng.integers(1, max_factors + 1))
        chosen: list[Token] = []
        for _ in range(n):
            options = [[t for t in fam if rules.can_extend(chosen, t)] for fam in fam_lists]
            cumulative = list(itertools.accumulate(len(o) for o in options))
            if cumulative[-1] == 0:
                break
            fam = options[_pick(rng, cumulative)]
            chosen.append(fam[int(rng.integers(len(fam)))])
        else:
            if rules.admits(chosen):
                term = Term.of(chosen)
                if term.signature not in existing:
                    return term
    raise VocabularyExhausted(f"no new admissible term after {max_attempts} attempts")


@dataclass
class EquationModel:
    """Linear combination of terms; coefficients are filled in by fitness evaluation."""

    terms: list[Term]
    coefficients: list[float] | None = None
    target_index: int | None = None

    @property
    def signatures(self) -> list[str]:
        return [t.signature for t in self.terms]

    def copy(self) -> "EquationModel":
        coefs = None if self.coefficients is None else list(self.coefficients)
        return EquationModel(list(self.terms), coefs, self.target_index)

    def coefficient_map(self) -> dict[str, float]:
        if self.coefficients is None:
            raise ValueError("model has not been evaluated")
        return dict(zip(self.signatures, self.coefficients))

    def render(self) -> str:
        if self.coefficients is None:
            return " + ".join(self.signatures) + " = 0"
        parts = [f"{float(c)!r}*{s}" for s, c in zip(self.signatures, self.coefficients)]
        return " + ".join(parts) + " = 0"


@dataclass(frozen=True)
class SearchSpace:
    """Token pool, families, rules and vocabulary shared by one discovery run."""

    tokens: tuple[Token, ...]
    t_max: int = 2
    rules: StructuralRules = StructuralRules()

    @classmethod
    def from_names(cls, names: Iterable[str], t_max: int = 2, rules: StructuralRules | None = None):
        return cls(tuple(sorted(token_from_name(n) for n in names)), t_max, rules or StructuralRules())

    @property
    def families(self) -> dict[str, tuple[Token, ...]]:
        return group_families(self.tokens)

    @property
    def vocabulary(self) -> TermVocabulary:
        return enumerate_vocabulary(self.tokens, self.t_max, self.rules)

    def token(self, name: str) -> Token:
        for t in self.tokens:
            if t.name == name:
                return t
        raise KeyError(name)
