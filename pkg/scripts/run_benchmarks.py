"""Per-problem MAE tables and the pooled minimal-error shares.

    python scripts/run_benchmarks.py --runs 10 --out results/benchmarks

Writes one report CSV per problem plus ``pooled.json`` and prints a table of
recovered runs and minimal-MAE rows per regime.
"""

import argparse
import json
import statistics
import time
from pathlib import Path

from eqdisco.evaluation import write_report_csv
from eqdisco.experiment import REGIME_NAMES, ExperimentConfig, run_experiment
from eqdisco.grid_data import PROBLEMS, generate_manufactured


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problems", default=",".join(PROBLEMS))
    parser.add_argument("--regimes", default=",".join(REGIME_NAMES))
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("results/benchmarks"))
    args = parser.parse_args()

    regimes = tuple(args.regimes.split(","))
    args.out.mkdir(parents=True, exist_ok=True)
    pooled = {r: {"rows": 0, "min_mae": 0, "recovered": 0} for r in regimes}
    per_problem = {}
    for problem in args.problems.split(","):
        bundle = generate_manufactured(problem, PROBLEMS[problem].default_grid())
        cfg = ExperimentConfig(regimes=regimes, runs=args.runs, seed=args.seed, timing=True)
        start = time.monotonic()
        outcome = run_experiment(bundle, cfg)
        elapsed = time.monotonic() - start
        write_report_csv(outcome.verdicts, args.out / f"{problem}.csv")

        print(f"\n{problem}  ({elapsed:.0f} s)")
        print(f"  {'regime':<14}{'recovered':>10}{'min-MAE':>9}{'median MAE':>12}{'median s':>10}")
        rows = {}
        for regime in regimes:
            s = outcome.report.summary[regime]
            maes = [v.mae for v in outcome.verdicts[regime] if v.recovered]
            med = statistics.median(maes) if maes else None
            rows[regime] = {**s.to_dict(), "median_mae": med}
            pooled[regime]["rows"] += s.runs
            pooled[regime]["min_mae"] += s.min_mae_run_count
            pooled[regime]["recovered"] += s.recovered
            med_txt = "n/a" if med is None else f"{med:.2e}"
            print(
                f"  {regime:<14}{s.recovered:>7}/{s.runs:<2}{s.min_mae_run_count:>9}"
                f"{med_txt:>12}{s.median_elapsed_s:>10.2f}"
            )
        per_problem[problem] = rows

    print("\npooled share of rows with minimal MAE")
    for regime, p in pooled.items():
        p["share"] = p["min_mae"] / p["rows"]
        print(f"  {regime:<14}{p['min_mae']:>4}/{p['rows']}  {100 * p['share']:.0f}%")
    (args.out / "pooled.json").write_text(
        json.dumps({"per_problem": per_problem, "pooled": pooled}, indent=2, sort_keys=True) + "\n"
    )


if __name__ == "__main__":
    main()
