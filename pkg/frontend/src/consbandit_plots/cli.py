"""Command-line renderer for harness output directories.

``plot_figures --in <dir> --kind {alpha|horizon} --out <file>`` reads
``<dir>/summary.csv`` (and, for alpha sweeps, the fixed horizon from
``<dir>/config.json``) and writes the figure to ``<file>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureInputError, FigureSpec, render


def _fixed_horizon(config_path: Path) -> int:
    if not config_path.exists():
        raise FigureInputError(
            f"{config_path} not found; alpha-sweep figures need the run's config for the horizon")
    with open(config_path) as fh:
        raw = json.load(fh)
    n = raw.get("n")
    if not isinstance(n, int):
        raise FigureInputError(f"{config_path}: expected a fixed integer horizon, got n={n!r}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot_figures",
                                     description="Render consbandit summary CSVs")
    parser.add_argument("--in", dest="input", required=True,
                        help="directory containing summary.csv (+ config.json)")
    parser.add_argument("--kind", required=True, choices=("alpha", "horizon"),
                        help="sweep variable on the x axis")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--summary", default="summary.csv",
                        help="summary file name inside the input directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    in_dir = Path(args.input)
    try:
        horizon = _fixed_horizon(in_dir / "config.json") if args.kind == "alpha" else None
        spec = FigureSpec(
            summary_csv=in_dir / args.summary,
            kind=args.kind,
            output=Path(args.out),
            horizon=horizon,
        )
        out = render(spec)
    except FigureInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
