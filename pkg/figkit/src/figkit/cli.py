"""figkit command line: render one figure from an exported trace directory."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="figkit", description=__doc__)
    ap.add_argument("--input", required=True, help="trace directory (continuous.csv, steps.csv, summary.json)")
    ap.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    ap.add_argument("--out", required=True, help="output image path (.png)")
    ap.add_argument("--no-cycle", action="store_true", help="skip the cycle overlay")
    ap.add_argument("--no-bounds", action="store_true", help="skip the bound lines")
    ap.add_argument("--dpi", type=int, default=130)
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    spec = FigureSpec(
        input_dir=args.input,
        kind=args.kind,
        out_path=args.out,
        cycle_overlay=not args.no_cycle,
        bound_lines=not args.no_bounds,
        dpi=args.dpi,
    )
    try:
        path = render(spec)
    except RenderError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
