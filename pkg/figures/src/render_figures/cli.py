"""render_figures <csv> <outdir> [--figure id]

Renders the benchmark figures (errors, contraction, control) from a
trajectory CSV into PNG files.  Exit code 0 on success, 2 on bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .reader import CsvFormatError
from .render import FIGURE_IDS, FigureSpec, render


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="render_figures", description=__doc__)
    parser.add_argument("csv", type=str, help="trajectory CSV produced by the simulator")
    parser.add_argument("outdir", type=str, help="directory for the rendered images")
    parser.add_argument("--figure", choices=FIGURE_IDS, default=None,
                        help="render only this figure (default: all three)")
    args = parser.parse_args(argv)

    ids = [args.figure] if args.figure else list(FIGURE_IDS)
    outdir = Path(args.outdir)
    try:
        for fid in ids:
            path = render(FigureSpec(Path(args.csv), fid, outdir / f"{fid}.png"))
            print(f"{fid}: {path}")
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
