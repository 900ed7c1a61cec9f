"""Command line entry point: ``esfem run|sweep|diagnose``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    diagnose,
    diagnostics_csv,
    emit_convergence_data,
    fit_slope,
    model_order,
    run_experiment,
    run_sweep,
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--surface", choices=["sphere", "ellipsoid", "circle", "ellipse"])
    parser.add_argument("--degree", type=int, help="element degree k")
    parser.add_argument("--bdf", type=int, help="BDF order p")
    parser.add_argument("--levels", help="level range a..b")
    parser.add_argument("--tau1", type=float, help="time step at level 1")
    parser.add_argument("--tend", type=float, help="final time T")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--norm", choices=["nodal", "lifted"])
    parser.add_argument("--jobs", type=int, help="levels run in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esfem", description="Evolving surface FEM convergence experiments.")
    sub = parser.add_subparsers(dest="verb", required=True)
    _common(sub.add_parser("run", help="error/EOC table over levels"))
    sweep = sub.add_parser("sweep", help="plot data for spatial or temporal convergence")
    _common(sweep)
    sweep.add_argument("--mode", choices=["space", "time"], default="space")
    sweep.add_argument(
        "--fixed",
        help="comma-separated fixed values: time steps (space mode) or mesh levels (time mode); empty string for none",
    )
    sweep.add_argument("--reference", choices=["exact", "self"], default="exact", help="time mode: error against the exact solution or successive differences")
    diag = sub.add_parser("diagnose", help="max lift distance and area error per level")
    _common(diag)
    diag.add_argument("--time", type=float, default=0.0, help="evaluation time")
    return parser


def make_config(args) -> ExperimentConfig:
    overrides = {
        "surface": args.surface,
        "degree": args.degree,
        "bdf": args.bdf,
        "levels": args.levels,
        "tau1": args.tau1,
        "tend": args.tend,
        "out": args.out,
        "norm": args.norm,
        "jobs": args.jobs,
    }
    text = Path(args.config).read_text() if args.config else ""
    return ExperimentConfig.from_text(text, **overrides)


def _parse_fixed(text: str | None, mode: str):
    if text is None:
        return None
    cast = float if mode == "space" else int
    return [cast(v) for v in text.split(",") if v.strip()]


def _run(args) -> None:
    config = make_config(args)
    result = run_experiment(config)
    print(result.format_table())
    print(f"wrote {Path(config.out) / 'table.csv'}")


def _sweep(args) -> None:
    config = make_config(args)
    lines = run_sweep(config, args.mode, _parse_fixed(args.fixed, args.mode), args.reference)
    slope = model_order(config, args.mode)
    paths = emit_convergence_data(lines, config.out, args.mode, slope)
    for line in lines:
        if len(line.x) >= 2:
            print(f"{line.label}: fitted L2 slope {fit_slope(line.x, line.l2):.4f} (reference {slope})")
    for path in paths:
        print(f"wrote {path}")


def _diagnose(args) -> None:
    config = make_config(args)
    rows = diagnose(config, args.time)
    text = diagnostics_csv(rows)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "diagnostics.csv").write_text(text)
    sys.stdout.write(text)


VERBS = {"run": _run, "sweep": _sweep, "diagnose": _diagnose}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        VERBS[args.verb](args)
    except Exception as exc:
        print(f"esfem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
