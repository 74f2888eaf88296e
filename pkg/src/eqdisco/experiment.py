"""Multi-regime, multi-seed discovery experiments on one dataset."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .evaluation import ExperimentReport, RunVerdict, aggregate, canonicalize_and_score
from .evolution import EvolutionConfig, RunResult, run
from .fitness import FitnessConfig, substream
from .genotype import SearchSpace, StructuralRules
from .grid_data import FieldBundle
from .importance import (
    CountTable,
    ImportanceTable,
    build_distribution,
    estimate_counts,
)

__all__ = [
    "REGIME_NAMES",
    "ExperimentConfig",
    "ExperimentOutcome",
    "run_seed",
    "estimate_bundle_counts",
    "build_tables",
    "run_single",
    "run_experiment",
]

REGIME_NAMES = ("classical", "fixed", "biased", "highly_biased", "uniform")

# stream label for the importance-count estimation, distinct from run seeds
_COUNT_STREAM = 2**31 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    regimes: tuple[str, ...] = REGIME_NAMES
    runs: int = 10
    seed: int = 0
    evolution: EvolutionConfig = EvolutionConfig()
    fitness: FitnessConfig = FitnessConfig()
    rules: StructuralRules = StructuralRules()
    count_runs: int = 10
    count_draws: int = 10_000
    # defaults to the dataset's ground-truth terms
    boost_terms: tuple[str, ...] | None = None
    timing: bool = False
    decimals: int | None = 4

    def __post_init__(self):
        unknown = [r for r in self.regimes if r not in REGIME_NAMES]
        if unknown:
            raise ValueError(f"unknown regimes {unknown}; valid: {', '.join(REGIME_NAMES)}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


@dataclass
class ExperimentOutcome:
    verdicts: dict[str, list[RunVerdict]]
    report: ExperimentReport
    tables: dict[str, ImportanceTable]
    counts: CountTable | None
    histories: dict[tuple[str, int], list[dict]] = field(default_factory=dict)


def run_seed(seed: int, run_index: int) -> int:
    """Evolution seed of run ``run_index``; shared by all regimes so rows are paired."""
    return int(np.random.SeedSequence([int(seed), int(run_index)]).generate_state(1, np.uint64)[0])


def search_space(bundle: FieldBundle, cfg: ExperimentConfig) -> SearchSpace:
    return SearchSpace.from_names(bundle.names, t_max=cfg.evolution.t_max, rules=cfg.rules)


def estimate_bundle_counts(bundle: FieldBundle, cfg: ExperimentConfig) -> CountTable:
    space = search_space(bundle, cfg)
    rng = substream(cfg.seed, _COUNT_STREAM)
    return estimate_counts(
        cfg.count_runs, cfg.count_draws, rng, space.vocabulary, space.families, space.t_max, space.rules
    )


def boost_terms_for(bundle: FieldBundle, cfg: ExperimentConfig) -> tuple[str, ...]:
    if cfg.boost_terms is not None:
        return tuple(cfg.boost_terms)
    if bundle.ground_truth is None:
        return ()
    return tuple(bundle.ground_truth.terms)


def build_tables(
    bundle: FieldBundle,
    cfg: ExperimentConfig,
    override: ImportanceTable | None = None,
) -> tuple[dict[str, ImportanceTable], CountTable | None]:
    """Importance tables for every directed regime in ``cfg``.

    ``override`` replaces every directed regime's table (no counting needed).
    """
    directed = [r for r in cfg.regimes if r != "classical"]
    if not directed:
        return {}, None
    if override is not None:
        return {r: override for r in directed}, None
    counts = estimate_bundle_counts(bundle, cfg)
    boost = boost_terms_for(bundle, cfg)
    return {r: build_distribution(counts, r, boost) for r in directed}, counts


def run_single(
    bundle: FieldBundle,
    regime: str,
    run_index: int,
    cfg: ExperimentConfig,
    table: ImportanceTable | None,
    log=None,
) -> tuple[RunVerdict, RunResult]:
    mode = "classical" if regime == "classical" else "directed"
    evo = replace(cfg.evolution, mode=mode, seed=run_seed(cfg.seed, run_index))
    result = run(
        evo,
        bundle,
        importance=table if mode == "directed" else None,
        fitness_cfg=cfg.fitness,
        space=search_space(bundle, cfg),
        log=log,
        timing=cfg.timing,
    )
    best = result.best.model
    if bundle.ground_truth is None:
        raise ValueError("dataset has no ground truth to score against")
    verdict = canonicalize_and_score(best, bundle.ground_truth)
    verdict.elapsed_s = result.elapsed_s if cfg.timing else None
    return verdict, result


def run_experiment(
    bundle: FieldBundle,
    cfg: ExperimentConfig,
    override: ImportanceTable | None = None,
    log_dir=None,
    progress=None,
) -> ExperimentOutcome:
    """Run ``cfg.runs`` seeds for each regime and aggregate the verdicts.

    With ``log_dir`` set, each run writes ``<regime>_<run>.jsonl`` with one JSON
    line per generation.
    """
    tables, counts = build_tables(bundle, cfg, override)
    verdicts: dict[str, list[RunVerdict]] = {}
    histories = {}
    for regime in cfg.regimes:
        verdicts[regime] = []
        for i in range(cfg.runs):
            lines: list[str] = []
            log = (lambda entry: lines.append(json.dumps(entry))) if log_dir else None
            verdict, result = run_single(bundle, regime, i, cfg, tables.get(regime), log)
            verdicts[regime].append(verdict)
            histories[(regime, i)] = result.history
            if log_dir:
                path = Path(log_dir) / f"{regime}_{i}.jsonl"
                path.write_text("\n".join(lines) + "\n")
            if progress:
                progress(regime, i, verdict)
    report = aggregate(verdicts, cfg.decimals)
    return ExperimentOutcome(verdicts, report, tables, counts, histories)
