"""uvmplot: render simulator CSV reports as static vector figures.

Usage: uvmplot <kind> <csv...> -o <image> [--title TITLE]
Exits 2 on schema mismatch or bad arguments, naming the expected header.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uvmplot",
                                 description="render simulator CSVs as figures")
    ap.add_argument("kind", choices=sorted(FIGURE_KINDS))
    ap.add_argument("csvs", nargs="+", metavar="csv")
    ap.add_argument("-o", "--out", required=True, help="output image path "
                    "(extension selects the format, e.g. .svg or .pdf)")
    ap.add_argument("--title", help="figure title")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(args.kind, args.csvs, args.out, title=args.title)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
