"""Print the importance tables of every regime for one benchmark problem.

    python scripts/importance_tables.py --problem wave
"""

import argparse

from eqdisco.experiment import ExperimentConfig, build_tables
from eqdisco.grid_data import PROBLEMS, generate_manufactured


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problem", default="burgers_inviscid", choices=list(PROBLEMS))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--top", type=int, default=0, help="only show the N most probable terms")
    args = parser.parse_args()

    bundle = generate_manufactured(args.problem, PROBLEMS[args.problem].default_grid())
    cfg = ExperimentConfig(regimes=("fixed", "biased", "highly_biased", "uniform"), seed=args.seed)
    tables, _ = build_tables(bundle, cfg)
    truth = set(bundle.ground_truth.terms)
    sigs = sorted(tables["fixed"].probs, key=lambda s: -tables["fixed"].probs[s])
    if args.top:
        sigs = sigs[: args.top]
    print(f"{'term':<24}" + "".join(f"{r:>15}" for r in tables))
    for sig in sigs:
        mark = "*" if sig in truth else " "
        print(f"{mark}{sig:<23}" + "".join(f"{t.probs[sig]:>15.4f}" for t in tables.values()))
    print("\n* ground-truth term")


if __name__ == "__main__":
    main()
