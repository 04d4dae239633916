"""Command-line surface: render a figure spec file."""

from __future__ import annotations

import argparse
import sys

from .figspec import FIGURE_KINDS, load_figure_spec
from .render import render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hjlab-figures", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help=f"render a figure spec ({', '.join(FIGURE_KINDS)})")
    p_render.add_argument("spec")
    args = parser.parse_args(argv)
    try:
        result = render(load_figure_spec(args.spec))
        print(f"wrote {result.path}")
        return 0
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
