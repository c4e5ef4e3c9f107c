"""Command line: render a sweep CSV into a figure."""
from __future__ import annotations

import argparse
import sys
from typing import Optional

from .render import FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotviz", description="Render sweep CSVs as figures.")
    parser.add_argument("command", choices=["render"])
    parser.add_argument("--csv", required=True, help="input sweep CSV")
    parser.add_argument("--kind", required=True,
                        choices=["order-size", "period-grid"])
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--group-by",
                        help="grouping column (default: ratio or d_sell)")
    parser.add_argument("--value", default="r_mf",
                        help="value column to aggregate (default r_mf)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        series = render(FigureSpec(input_csv=args.csv, figure_kind=args.kind,
                                   output_image=args.out, group_by=args.group_by,
                                   value_column=args.value))
    except (RenderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.out}: {len(series)} series, "
          f"{sum(len(s.x) for s in series)} points")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
