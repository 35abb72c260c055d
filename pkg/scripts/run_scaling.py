#!/usr/bin/env python3
"""Scaling sweeps: diagram build time and probability-computation time.

Runs the birthday sweep (measurable exact inference, n = 6..16) and the
palindrome evidence sweep, writing one CSV per experiment.  Thin wrapper
over the CLI's reproduce subcommand.
"""

import argparse
from pathlib import Path

from osdd.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="scaling_out")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--joint", action="store_true",
                    help="also time the palindrome query-and-evidence build")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for experiment in ("birthday", "palindrome"):
        out = outdir / f"{experiment}.csv"
        argv = [
            "reproduce", experiment,
            "--out", str(out),
            "--repeats", str(args.repeats),
        ]
        if args.joint and experiment == "palindrome":
            argv.append("--joint")
        code = cli_main(argv)
        if code != 0:
            raise SystemExit(code)
        print(f"{experiment}: {out}")
        print(out.read_text())


if __name__ == "__main__":
    main()
