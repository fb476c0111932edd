"""Command line for rendering figures from training run logs.

    moerl-plot curves  --in 'results/*.csv' --out figures
    moerl-plot experts --in 'results/*.csv' --out figures --fmt svg
    moerl-plot dormant --in 'results/*.csv' --out figures --band ci95
    moerl-plot gradsim --in 'results/*.csv' --out figures

Logs are grouped by experiment name (the filename minus its seed suffix);
each group yields one image per figure kind. Exit code 0 on success, 1 on
missing inputs or malformed logs.
"""

from __future__ import annotations

import argparse
import glob
import sys

from .render import KINDS, render

HELP = {
    "curves": "normalized-return learning curves with uncertainty bands",
    "experts": "routing-probability heatmaps per layer and task",
    "dormant": "dormant-unit fraction curves for actor and critic",
    "gradsim": "sequential gradient-bucket cosine similarity traces",
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--in", dest="inputs", required=True, metavar="GLOB",
                        help="glob of run-log CSV files (quote it)")
    shared.add_argument("--out", required=True, metavar="DIR",
                        help="directory for the rendered images")
    shared.add_argument("--band", choices=("stderr", "ci95"),
                        default="stderr", help="uncertainty band width")
    shared.add_argument("--fmt", choices=("png", "svg"), default="png",
                        help="image format")

    parser = argparse.ArgumentParser(
        prog="moerl-plot",
        description="Render figures from training run logs.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[shared], help=HELP[kind])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    paths = sorted(glob.glob(args.inputs))
    if not paths:
        print(f"error: no files match {args.inputs}", file=sys.stderr)
        return 1
    try:
        written = render(args.kind, paths, args.out,
                         band=args.band, fmt=args.fmt)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0
