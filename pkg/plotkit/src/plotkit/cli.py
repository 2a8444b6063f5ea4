"""plotkit command line: render one figure from a benchmark CSV.

    plotkit <figure-id> --in telemetry.csv --out fig.svg
"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureSpec, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render benchmark result figures from CSV files."
    )
    parser.add_argument("figure_id", choices=sorted(FIGURE_IDS), help="figure to render")
    parser.add_argument("--in", dest="input_csv", required=True, metavar="CSV")
    parser.add_argument("--out", dest="output_path", required=True, metavar="IMAGE")
    return parser


def cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        figure_id=args.figure_id,
        input_csv=args.input_csv,
        output_path=args.output_path,
    )
    try:
        out = render(spec)
    except SchemaMismatch as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
