"""softdeflate-plots: render benchmark CSVs into comparison figures.

    softdeflate-plots render --in results.csv --y fro_err --y sin_theta --out figs/

Exit codes: 0 on success, 2 on bad arguments or unreadable/invalid input.
"""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, RenderError, render_comparison


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="softdeflate-plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    render_p = sub.add_parser("render", help="render figures from result CSVs")
    render_p.add_argument(
        "--in", dest="inputs", action="append", required=True, help="input CSV (repeatable)"
    )
    render_p.add_argument(
        "--y",
        dest="metrics",
        action="append",
        help="y metric (repeatable; default fro_err and sin_theta)",
    )
    render_p.add_argument("--out", default="figs", help="output directory")
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(
            inputs=tuple(args.inputs),
            y_metrics=tuple(args.metrics) if args.metrics else ("fro_err", "sin_theta"),
            out_dir=args.out,
        )
        result = render_comparison(spec)
    except (RenderError, OSError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    for path in result["figures"]:
        print(path)
    print(result["aggregate"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
