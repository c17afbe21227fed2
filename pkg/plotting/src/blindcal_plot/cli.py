"""Command-line figure renderer for harness result CSVs.

Usage: blindcal-plot --in results.csv --kind length_sweep --out fig.png
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from blindcal_plot.figures import FIGURE_KINDS, PlotError, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindcal-plot", description=__doc__)
    parser.add_argument("--in", dest="input_csv", required=True,
                        help="harness result CSV to read")
    parser.add_argument("--kind", required=True, choices=sorted(FIGURE_KINDS),
                        help="figure layout to render")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="image file to write (format from extension)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else list(argv))
    try:
        spec = PlotSpec(args.input_csv, args.kind, args.output_path)
        render(spec)
    except PlotError as exc:
        print(f"blindcal-plot: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"blindcal-plot: cannot write figure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
