"""fraqctl-plot <figure.json>: render one figure from fraq run outputs.

Exit 0 on success; exit 2 on a schema problem, with the offending field
named on stderr."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureError, load_spec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fraqctl-plot", description=__doc__)
    parser.add_argument("spec", help="path to a figure-spec JSON file")
    args = parser.parse_args(argv)
    try:
        out = render(load_spec(args.spec))
    except FigureError as exc:
        print(f"fraqctl-plot: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
