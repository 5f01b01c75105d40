#!/usr/bin/env python3
"""Run every scenario through the CLI and write a report for each.

    python3 scripts/run_all.py [OUT_ROOT] [--only quasimode_sweep,oracle_sweep]
"""
import argparse
import sys
from pathlib import Path

from dampedwave.cli import main
from dampedwave.experiments import SCENARIOS


def run_all(root: Path, only=None) -> int:
    worst = 0
    for name in only or SCENARIOS:
        code = main(["run", "--scenario", name, "--out", str(root / name)])
        if code in (0, 1):
            main(["report", str(root / name)])
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_root", nargs="?", default="runs")
    ap.add_argument("--only", default=None, help="comma-separated scenario names")
    ns = ap.parse_args()
    sys.exit(run_all(Path(ns.out_root), ns.only.split(",") if ns.only else None))
