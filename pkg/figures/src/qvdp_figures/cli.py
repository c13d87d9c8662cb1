"""Command line: qvdp-figures <figure> --inputs a.csv b.csv --out fig.png"""

from __future__ import annotations

import argparse
import sys

from qvdp_figures.io import InputError
from qvdp_figures.render import FIGURES, FigureSpec, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="qvdp-figures",
                                 description="render figures from qvdp CSV outputs")
    ap.add_argument("figure", metavar="|".join(sorted(FIGURES)))
    ap.add_argument("--inputs", nargs="+", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--normalization", default="max", choices=("max", "none"))
    args = ap.parse_args(argv)
    try:
        path = render(FigureSpec(figure=args.figure, inputs=args.inputs,
                                 output=args.out, normalization=args.normalization))
    except (InputError, OSError) as exc:
        print(f"qvdp-figures: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
