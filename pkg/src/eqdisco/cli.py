"""Command-line front end: ``eqdisco generate | distribution | discover``.

Every flag may also come from a JSON ``--config`` file (keys use underscores);
flags given on the command line win. Exit codes: 0 success, 1 usage or config
error, 2 data error. Errors print one line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields as dc_fields
from pathlib import Path

from . import __version__
from .evaluation import write_report_csv, write_summary_json
from .evolution import EvolutionConfig
from .experiment import REGIME_NAMES, ExperimentConfig, build_tables, estimate_bundle_counts
from .fitness import FitnessConfig
from .genotype import StructuralRules
from .grid_data import PROBLEMS, BundleError, Grid, generate_manufactured, load_bundle, save_bundle
from .importance import REGIMES, build_distribution, load_distribution, save_distribution

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, EXIT_USAGE)


DEFAULTS = {
    "seed": 0,
    "force": False,
    # generate
    "nx": 101,
    "nt": 101,
    "solution": None,
    "x_range": None,
    "t_range": None,
    # distribution / discover
    "t_max": 2,
    "count_runs": 10,
    "count_draws": 10_000,
    "boost_terms": None,
    "max_time_derivatives": 1,
    # discover
    "regimes": ",".join(REGIME_NAMES),
    "runs": 10,
    "population": 64,
    "generations": 100,
    "crossover_rate": 0.8,
    "token_mutation_rate": 0.3,
    "term_mutation_rate": 0.3,
    "n_terms": 5,
    "elitism": 1,
    "tournament_size": 2,
    "lam": 1e-2,
    "tol": 1e-8,
    "max_iter": 10_000,
    "prune_threshold": 1e-4,
    "eps_floor": 1e-12,
    "refit": True,
    "decimals": 4,
    "timing": False,
    "distribution_file": None,
    "dump_distribution": False,
}


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="64-bit master seed")
    p.add_argument("--out", help="output directory (file for 'distribution')")
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--force", action="store_true", default=None, help="overwrite existing output")


def _space_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--t-max", type=int, help="maximum tokens per term")
    p.add_argument("--count-runs", type=int, help="generator runs used to estimate term counts")
    p.add_argument("--count-draws", type=int, help="term draws per counting run")
    p.add_argument("--boost-terms", help="comma-separated signatures to boost in biased regimes")
    p.add_argument(
        "--max-time-derivatives", type=int, help="time-derivative tokens allowed per term (-1: no limit)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqdisco", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eqdisco {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a manufactured benchmark dataset")
    _shared(g)
    g.add_argument("--problem", help=f"one of: {', '.join(PROBLEMS)}")
    g.add_argument("--nx", type=int)
    g.add_argument("--nt", type=int)
    g.add_argument("--x-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--t-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--solution", help="closed-form variant (problem dependent)")

    d = sub.add_parser("distribution", help="build an importance table for a dataset")
    _shared(d)
    _space_flags(d)
    d.add_argument("--regime", help=f"one of: {', '.join(REGIMES)}")

    r = sub.add_parser("discover", help="run discovery experiments and write reports")
    _shared(r)
    _space_flags(r)
    r.add_argument("--regimes", help=f"comma-separated subset of: {', '.join(REGIME_NAMES)}")
    r.add_argument("--runs", type=int, help="independent seeds per regime")
    r.add_argument("--population", type=int)
    r.add_argument("--generations", type=int)
    r.add_argument("--crossover-rate", type=float)
    r.add_argument("--token-mutation-rate", type=float)
    r.add_argument("--term-mutation-rate", type=float)
    r.add_argument("--n-terms", type=int)
    r.add_argument("--elitism", type=int)
    r.add_argument("--tournament-size", type=int)
    r.add_argument("--lam", type=float, help="LASSO penalty in scaled units")
    r.add_argument("--tol", type=float)
    r.add_argument("--max-iter", type=int)
    r.add_argument("--prune-threshold", type=float)
    r.add_argument("--eps-floor", type=float)
    r.add_argument("--no-refit", dest="refit", action="store_false", default=None)
    r.add_argument("--decimals", type=int, help="MAE rounding used to find each row's minimum")
    r.add_argument("--timing", action="store_true", default=None, help="record wall-clock times")
    r.add_argument("--distribution-file", help="JSON table used for every directed regime")
    r.add_argument(
        "--dump-distribution", action="store_true", default=None, help="write the tables used"
    )
    return parser


def _settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise CliError("config file must hold a JSON object")
        valid = set(DEFAULTS) | set(vars(args))
        for key, value in config.items():
            key = key.replace("-", "_")
            if key not in valid or key in ("command", "config"):
                raise CliError(f"unknown config key {key!r}")
            settings[key] = value
    for key, value in vars(args).items():
        if value is not None:
            settings[key] = value
    return settings


def _prepare_out_dir(out, force: bool) -> Path:
    if not out:
        raise CliError("--out is required")
    path = Path(out)
    if path.exists() and not path.is_dir():
        raise CliError(f"output path {path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()) and not force:
        raise CliError(f"output directory {path} is not empty (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _split_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _load(path) -> object:
    try:
        return load_bundle(path)
    except (BundleError, OSError) as exc:
        raise CliError(str(exc), EXIT_DATA) from exc


def _rules(s: dict) -> StructuralRules:
    limit = s["max_time_derivatives"]
    return StructuralRules(max_time_derivatives=None if limit is None or limit < 0 else int(limit))


def cmd_generate(s: dict) -> int:
    problem = s.get("problem")
    if problem not in PROBLEMS:
        raise CliError(f"unknown problem {problem!r}; valid ids: {', '.join(PROBLEMS)}")
    prob = PROBLEMS[problem]
    x_range = s.get("x_range") or prob.x_range
    t_range = s.get("t_range") or prob.t_range
    try:
        if len(x_range) != 2 or len(t_range) != 2:
            raise ValueError("ranges take exactly two values")
        grid = Grid(int(s["nx"]), int(s["nt"]), *map(float, (*x_range, *t_range)))
        bundle = generate_manufactured(problem, grid, s.get("solution"))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _prepare_out_dir(s.get("out"), bool(s["force"]))
    save_bundle(bundle, out)
    print(f"wrote {problem} dataset ({grid.nt}x{grid.nx}, fields: {', '.join(bundle.names)}) to {out}")
    return EXIT_OK


def _experiment_config(s: dict, regimes) -> ExperimentConfig:
    boost = _split_list(s["boost_terms"]) or None
    try:
        evo = EvolutionConfig(
            population_size=int(s["population"]),
            generations=int(s["generations"]),
            crossover_rate=float(s["crossover_rate"]),
            token_mutation_rate=float(s["token_mutation_rate"]),
            term_mutation_rate=float(s["term_mutation_rate"]),
            n_terms=int(s["n_terms"]),
            t_max=int(s["t_max"]),
            seed=int(s["seed"]),
            elitism=int(s["elitism"]),
            tournament_size=int(s["tournament_size"]),
        )
        fit = FitnessConfig(
            lam=float(s["lam"]),
            tol=float(s["tol"]),
            max_iter=int(s["max_iter"]),
            prune_threshold=float(s["prune_threshold"]),
            eps_floor=float(s["eps_floor"]),
            refit=bool(s["refit"]),
        )
        return ExperimentConfig(
            regimes=tuple(regimes),
            runs=int(s["runs"]),
            seed=int(s["seed"]),
            evolution=evo,
            fitness=fit,
            rules=_rules(s),
            count_runs=int(s["count_runs"]),
            count_draws=int(s["count_draws"]),
            boost_terms=tuple(boost) if boost else None,
            timing=bool(s["timing"]),
            decimals=None if s["decimals"] is None else int(s["decimals"]),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc


def cmd_distribution(s: dict) -> int:
    regime = s.get("regime")
    if regime not in REGIMES:
        raise CliError(f"unknown regime {regime!r}; valid: {', '.join(REGIMES)}")
    bundle = _load(s["data"])
    boost = _split_list(s["boost_terms"])
    if regime in ("biased", "highly_biased") and not boost:
        raise CliError(f"regime {regime!r} requires --boost-terms")
    cfg = _experiment_config({**s, "boost_terms": None}, ["fixed"])
    counts = estimate_bundle_counts(bundle, cfg)
    try:
        table = build_distribution(counts, regime, boost)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    text = json.dumps(table.probs, indent=2) + "\n"
    out = s.get("out")
    if out:
        path = Path(out)
        if path.exists() and not s["force"]:
            raise CliError(f"output file {path} exists (use --force)")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_discover(s: dict) -> int:
    regimes = _split_list(s["regimes"])
    unknown = [r for r in regimes if r not in REGIME_NAMES]
    if not regimes or unknown:
        raise CliError(f"invalid regimes {unknown or regimes}; valid: {', '.join(REGIME_NAMES)}")
    cfg = _experiment_config(s, regimes)
    bundle = _load(s["data"])
    if bundle.ground_truth is None:
        raise CliError("dataset manifest has no ground_truth to score against", EXIT_DATA)

    from .experiment import run_experiment, search_space

    override = None
    if s["distribution_file"]:
        vocab = search_space(bundle, cfg).vocabulary.signatures
        try:
            override = load_distribution(s["distribution_file"], vocab)
        except (OSError, ValueError) as exc:
            raise CliError(f"bad distribution file: {exc}", EXIT_DATA) from exc
    try:
        tables, _ = build_tables(bundle, cfg, override)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    out = _prepare_out_dir(s.get("out"), bool(s["force"]))
    logs = out / "logs"
    logs.mkdir(exist_ok=True)

    def progress(regime, i, verdict):
        mae = "n/a" if verdict.mae is None else f"{verdict.mae:.4g}"
        print(f"{regime} run {i}: {verdict.status} mae={mae}", file=sys.stderr)

    outcome = run_experiment(bundle, cfg, override=override, log_dir=logs, progress=progress)
    write_report_csv(outcome.verdicts, out / "report.csv")
    extra = {
        "dataset": str(s["data"]),
        "seed": cfg.seed,
        "runs": cfg.runs,
        "distribution_file": s["distribution_file"],
        "distributions": {r: t.probs for r, t in outcome.tables.items()},
        "settings": {k: s[k] for k in sorted(DEFAULTS) if k not in ("force",)},
    }
    write_summary_json(outcome.report, out / "summary.json", extra)
    if s["dump_distribution"] and outcome.tables:
        ddir = out / "distributions"
        ddir.mkdir(exist_ok=True)
        for regime, table in outcome.tables.items():
            save_distribution(table, ddir / f"{regime}.json")
    for regime, summary in outcome.report.summary.items():
        print(
            f"{regime}: recovered {summary.recovered}/{summary.runs}, "
            f"minimal-MAE rows {summary.min_mae_run_count}"
        )
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "distribution": cmd_distribution, "discover": cmd_discover}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise CliError("a command is required: generate, distribution or discover")
        settings = _settings(args)
        return COMMANDS[args.command](settings)
    except CliError as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return exc.code
