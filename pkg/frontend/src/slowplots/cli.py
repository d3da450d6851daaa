"""Command line entry point: render figures from a spec file and a data dir."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slowplots.data import SchemaError
from slowplots.figspec import FigureSpec, SpecError
from slowplots.render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slowplots", description="Render figures from diagnostic CSV files"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="draw every figure in a spec file")
    p_render.add_argument("--spec", type=Path, required=True, help="figure spec YAML")
    p_render.add_argument("--data", type=Path, required=True, help="CSV directory")
    p_render.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)

    try:
        specs = FigureSpec.from_yaml(args.spec)
        for spec in specs:
            path = render(spec, args.data, args.out)
            print(f"wrote {path}")
    except (SpecError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
