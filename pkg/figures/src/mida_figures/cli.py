"""figures <kind> --in <csv...> --out <path> [--title ...]"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureError, FigureJob, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures", description="Render experiment CSVs into figures.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    job = FigureJob(kind=args.kind, input_csv=tuple(args.inputs),
                    output=args.out, title=args.title)
    try:
        render(job)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
