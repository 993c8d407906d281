"""Command line: plots <figure_id> --in <files...> --out <path>."""

from __future__ import annotations

import argparse
import sys

from .figspec import FIGURE_IDS, FigureSpec, SchemaError
from .render import render

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render a figure from spinecho CSV/JSON data products.",
    )
    parser.add_argument("figure_id", choices=sorted(FIGURE_IDS))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input data files (CSV, plus optional JSON summaries)")
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(args.figure_id, list(args.inputs), args.out)
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
