"""Scoring discovered equations against ground truth and aggregating runs."""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .genotype import EquationModel
from .grid_data import GroundTruthEquation

__all__ = [
    "RECOVERED",
    "NOT_RECOVERED",
    "RunVerdict",
    "RegimeSummary",
    "ExperimentReport",
    "canonicalize_and_score",
    "aggregate",
    "write_report_csv",
]

RECOVERED = "recovered"
NOT_RECOVERED = "not_recovered"


@dataclass
class RunVerdict:
    status: str
    mae: float | None = None
    noise_terms: list[tuple[str, float]] = field(default_factory=list)
    elapsed_s: float | None = None
    equation: str = ""

    def __post_init__(self):
        if (self.status == RECOVERED) != (self.mae is not None):
            raise ValueError("mae must be present exactly when the run recovered")
        if self.mae is not None and self.mae < 0:
            raise ValueError("mae must be nonnegative")

    @property
    def recovered(self) -> bool:
        return self.status == RECOVERED


def canonicalize_and_score(model: EquationModel, truth: GroundTruthEquation) -> RunVerdict:
    """Rescale ``model`` to the truth's normalization and measure coefficient MAE.

    The run counts as recovered when every truth term is present with a nonzero
    coefficient; wrong signs are left to the MAE. Terms outside the truth are
    reported as noise and excluded from the MAE. Arithmetic stays in the
    coefficients' own number type, so ``Fraction`` input gives an exact MAE.
    """
    if model.coefficients is None:
        return RunVerdict(NOT_RECOVERED, equation=model.render())
    coefs = model.coefficient_map()
    for sig in truth.terms:
        if coefs.get(sig, 0) == 0:
            return RunVerdict(NOT_RECOVERED, equation=model.render())
    norm = coefs[truth.normalization_term]
    scaled = {s: c / norm for s, c in coefs.items()}

    errors = []
    for sig, expected in truth.terms.items():
        got = scaled[sig]
        if isinstance(got, Fraction):
            expected = Fraction(expected)
        errors.append(abs(got - expected))
    mae = sum(errors) / len(errors)
    noise = [(s, c) for s, c in scaled.items() if s not in truth.terms]
    return RunVerdict(RECOVERED, mae=mae, noise_terms=noise, equation=model.render())


@dataclass
class RegimeSummary:
    runs: int
    recovered: int
    min_mae_run_count: int
    recovery_rate: float
    min_mae_share: float
    median_elapsed_s: float | None

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "recovered": self.recovered,
            "min_mae_run_count": self.min_mae_run_count,
            "recovery_rate": self.recovery_rate,
            "min_mae_share": self.min_mae_share,
            "median_elapsed_s": self.median_elapsed_s,
        }


@dataclass
class ExperimentReport:
    verdicts: dict[str, list[RunVerdict]]
    # flags[regime][row] is True where that regime reached the row's minimal MAE
    flags: dict[str, list[bool]]
    summary: dict[str, RegimeSummary]

    def to_dict(self) -> dict:
        return {regime: s.to_dict() for regime, s in self.summary.items()}


def aggregate(verdicts: Mapping[str, Sequence[RunVerdict]], decimals: int | None = 4) -> ExperimentReport:
    """Flag, per run row, the regimes reaching the smallest MAE among recovered runs.

    Row ``i`` groups the ``i``-th run of every regime. MAEs are compared after
    rounding to ``decimals`` places (``None`` compares exactly); all regimes
    sharing the minimum are flagged.
    """
    if not verdicts:
        raise ValueError("no regimes to aggregate")
    for regime, runs in verdicts.items():
        if not runs:
            raise ValueError(f"regime {regime!r} has no runs")
    n_rows = max(len(v) for v in verdicts.values())

    def key(mae):
        return mae if decimals is None else round(mae, decimals)

    flags = {regime: [False] * len(runs) for regime, runs in verdicts.items()}
    for row in range(n_rows):
        scored = {
            regime: key(runs[row].mae)
            for regime, runs in verdicts.items()
            if row < len(runs) and runs[row].recovered
        }
        if not scored:
            continue
        best = min(scored.values())
        for regime, value in scored.items():
            if value == best:
                flags[regime][row] = True

    summary = {}
    for regime, runs in verdicts.items():
        n = len(runs)
        recovered = sum(v.recovered for v in runs)
        count = sum(flags[regime])
        times = [v.elapsed_s for v in runs if v.elapsed_s is not None]
        summary[regime] = RegimeSummary(
            runs=n,
            recovered=recovered,
            min_mae_run_count=count,
            recovery_rate=recovered / n,
            min_mae_share=count / n,
            median_elapsed_s=statistics.median(times) if times else None,
        )
    return ExperimentReport({k: list(v) for k, v in verdicts.items()}, flags, summary)


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_report_csv(verdicts: Mapping[str, Sequence[RunVerdict]], path) -> None:
    """One row per run, sorted by regime then run index."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["regime", "run", "status", "mae", "elapsed_s"])
        for regime in sorted(verdicts):
            for i, v in enumerate(verdicts[regime]):
                writer.writerow([regime, i, v.status, _fmt(v.mae), _fmt(v.elapsed_s)])


def write_summary_json(report: ExperimentReport, path, extra: dict | None = None) -> None:
    data = {"regimes": report.to_dict()}
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
