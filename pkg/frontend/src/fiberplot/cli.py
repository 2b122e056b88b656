"""Render figure families from engine output directories.

    fiberplot <family> --in <dir> --out <dir> [--format png|svg]
    fiberplot all --in <dir> --out <dir>

Families: intensity-vs-beta, contact-histogram, rve-fit, runtime,
application.  The rve-fit family reads the RVE study CSVs; the others read
a sweep table.csv.
"""

from __future__ import annotations

import argparse
import sys

from .families import FAMILIES


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fiberplot")
    ap.add_argument("family", choices=sorted(FAMILIES) + ["all"])
    ap.add_argument("--in", dest="in_dir", required=True)
    ap.add_argument("--out", dest="out_dir", required=True)
    ap.add_argument("--format", choices=["png", "svg"], default="png")
    args = ap.parse_args(argv)

    names = sorted(FAMILIES) if args.family == "all" else [args.family]
    status = 0
    for name in names:
        try:
            path = FAMILIES[name](args.in_dir, args.out_dir, args.format)
            print(f"{name}: {path}")
        except FileNotFoundError as exc:
            print(f"{name}: skipped ({exc})", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    raise SystemExit(main())
