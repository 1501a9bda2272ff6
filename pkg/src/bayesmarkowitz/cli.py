"""Command line entry point.

    bayesmarkowitz sweep-sigma0 --config configs/figure1.ini --out results --svg
    bayesmarkowitz report-all --out results

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import reports
from .config import BUILTIN, ScenarioConfig, load_config
from .errors import ConfigError, DegenerateModelError, DomainError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# command -> (builtin scenario used without --config, output stem)
COMMANDS = {
    "sweep-sigma0": ("figure1", "sweep_sigma0"),
    "sweep-sharpe": ("figure3", "sweep_sharpe"),
    "sweep-time": ("figure4", "sweep_time"),
    "sweep-horizon": ("figure5", "sweep_horizon"),
    "simulate": ("figure4", "simulate"),
}

SWEEPS = {
    "sweep-sigma0": reports.sweep_sigma0,
    "sweep-sharpe": reports.sweep_sharpe,
    "sweep-time": reports.sweep_time,
    "sweep-horizon": reports.sweep_horizon,
}

REPORT_ALL = (
    ("figure1", "sweep-sigma0"),
    ("figure2", "sweep-sigma0"),
    ("figure3", "sweep-sharpe"),
    ("figure4", "sweep-time"),
    ("figure5", "sweep-horizon"),
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayesmarkowitz",
                                description="Value of information in Bayesian mean-variance investing.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["report-all"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="INI scenario file (default: built-in parameters)")
        sp.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        sp.add_argument("--svg", action="store_true", help="also write an SVG chart")
        sp.add_argument("--seed", type=int, help="override [mc] seed")
        sp.add_argument("--paths", type=int, help="override [mc] n_paths")
        sp.add_argument("--steps", type=int, help="override [mc] n_steps")
        sp.add_argument("--workers", type=int, help="override [mc] workers")
        if name == "simulate":
            sp.add_argument("--dump-paths", action="store_true",
                            help="also write per-path terminal wealth")
    return p


def _resolve(args, builtin: str) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else BUILTIN[builtin]
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    for flag, v in (("--paths", args.paths), ("--steps", args.steps), ("--workers", args.workers)):
        if v is not None and v < 1:
            raise ConfigError(f"{flag} must be positive")
    return cfg.with_mc(seed=args.seed, n_paths=args.paths, n_steps=args.steps, workers=args.workers)


def _emit(kind: str, table, out: Path, stem: str, svg: bool) -> list[Path]:
    written = [table.write(out / f"{stem}.csv")]
    if svg:
        path = out / f"{stem}.svg"
        path.write_text(reports.chart_for(kind, table))
        written.append(path)
    return written


def run(args) -> list[Path]:
    out = args.out
    if args.command == "report-all":
        if args.config:
            raise ConfigError("report-all uses the built-in scenarios; --config is not accepted")
        written = []
        for name, kind in REPORT_ALL:
            cfg = _resolve(args, name)
            written += _emit(kind, SWEEPS[kind](cfg), out, name, args.svg)
        return written
    builtin, stem = COMMANDS[args.command]
    cfg = _resolve(args, builtin)
    if args.command == "simulate":
        table, ens = reports.run_simulation(cfg)
        written = [table.write(out / f"{stem}.csv")]
        if args.dump_paths:
            written.append(reports.path_table(ens).write(out / f"{stem}_paths.csv"))
        return written
    return _emit(args.command, SWEEPS[args.command](cfg), out, stem, args.svg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for path in run(args):
            print(path)
    except (ConfigError, DomainError, DegenerateModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
