"""Command line: plots <kind> <csv> -o <img> [--theory <csv>]."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render pump-probe witness CSV outputs as figures"
    )
    parser.add_argument("kind", choices=["chi", "witness", "rsweep"])
    parser.add_argument("csv", help="input CSV path")
    parser.add_argument("-o", "--output", required=True, help="output image (png/svg)")
    parser.add_argument("--theory", help="oracle chi_theory.csv overlay (kind=chi only)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        csv_path=Path(args.csv),
        output_path=Path(args.output),
        theory_csv=Path(args.theory) if args.theory else None,
    )
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
