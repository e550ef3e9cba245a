"""Command-line entry point: analytic tables, Monte Carlo twins and figure recipes."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, recipes
from .config import ConfigError, RunConfig
from .errors import NonConvergenceError, ParameterError, QuadratureError
from .report import write_tables

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

TABLE_COMMANDS = {
    "moments": recipes.moments_table,
    "laplace": recipes.laplace_table,
    "success": recipes.success_table,
    "joint-success": recipes.joint_success_table,
    "finite": recipes.finite_table,
    "window": recipes.window_table,
    "compare-freespace": recipes.compare_freespace,
}
SIM_TARGETS = sorted([*TABLE_COMMANDS, "coverage", "fig"])


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="simulation seed")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--tol", type=float, help="series truncation tolerance")
    p.add_argument("--radius", type=int, help="initial series truncation radius")
    p.add_argument("--out", type=Path, help="output directory (or .json file for sample-grid)")
    p.add_argument("--no-png", action="store_true", help="write CSV only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-building", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-grid", help="sample a grid realization as versioned JSON")
    _common(p)
    for name in TABLE_COMMANDS:
        p = sub.add_parser(name, help=f"{name} table")
        _common(p)
        p.add_argument("--mc", action="store_true", help="add Monte Carlo estimates")
    p = sub.add_parser("coverage", help="downlink coverage of the typical user")
    _common(p)
    p.add_argument("--assoc", choices=["strongest", "nearest"], default="strongest")
    p.add_argument("--mc", action="store_true", help="add Monte Carlo estimates")
    p = sub.add_parser("fig", help="reproduce a figure as CSV and PNG")
    _common(p)
    p.add_argument("figure", type=int, choices=recipes.FIGURE_IDS)
    p.add_argument("--mc", action="store_true", help="add Monte Carlo estimates")
    p = sub.add_parser("simulate", help="any table command with Monte Carlo estimates")
    _common(p)
    p.add_argument("target", choices=SIM_TARGETS)
    p.add_argument("figure", type=int, nargs="?", choices=recipes.FIGURE_IDS)
    p.add_argument("--assoc", choices=["strongest", "nearest"], default="strongest")
    return parser


def _overrides(args) -> dict:
    out: dict = {}
    if args.seed is not None:
        out.setdefault("sim", {})["seed"] = args.seed
    if args.samples is not None:
        out.setdefault("sim", {})["samples"] = args.samples
    if args.tol is not None:
        out.setdefault("series", {})["tol"] = args.tol
    if args.radius is not None:
        out.setdefault("series", {})["radius"] = args.radius
    if args.out is not None:
        out["output"] = str(args.out)
    return out


def _tables(command: str, args, cfg: RunConfig, with_mc: bool):
    if command == "coverage":
        return recipes.coverage_table(cfg, args.assoc, with_mc)
    if command == "fig":
        if args.figure is None:
            raise ConfigError("simulate fig needs a figure id")
        return recipes.FIGURES[args.figure](cfg, with_mc)
    return TABLE_COMMANDS[command](cfg, with_mc)


def run(args) -> int:
    cfg = RunConfig.load(args.config, _overrides(args))
    out = Path(cfg.doc.get("output", "results"))
    if args.command == "sample-grid":
        g = recipes.sample_grid(cfg)
        path = out if out.suffix == ".json" else out / "realization.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(g.to_json())
        print(f"wrote {path} ({g.num_bs} base stations, walls per axis {[len(w) for w in g.walls]})")
        return 0
    if args.command == "simulate":
        command, with_mc = args.target, True
    else:
        command, with_mc = args.command, args.mc
    tables = _tables(command, args, cfg, with_mc)
    for path in write_tables(tables, out, cfg.to_json(), png=not args.no_png):
        print(f"wrote {path}")
    for t in tables:
        print(f"{t.name}: {len(t.rows)} rows")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, QuadratureError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
