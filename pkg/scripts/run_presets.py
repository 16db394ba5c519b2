"""Run every stage on every preset and print a one-line summary per preset.

    python3 scripts/run_presets.py --out runs --samples 1000000
"""
from __future__ import annotations

import argparse
import csv
import time
from pathlib import Path

from quenched_cp import cli, scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--samples", type=int, default=10**6)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="*", default=None, help="subset of preset names")
    args = ap.parse_args()

    names = args.only or scenario.preset_names()
    print(f"{'preset':<24} {'exit':>4} {'secs':>6} {'TV':>8} {'thresh':>6} {'mean':>8} {'var':>8} {'var model':>9}")
    for name in names:
        out = Path(args.out) / name
        t0 = time.perf_counter()
        code = cli.main(["all", "--scenario", name, "--out", str(out),
                         "--samples", str(args.samples), "--workers", str(args.workers)])
        secs = time.perf_counter() - t0
        row = {}
        if (out / "compare.csv").exists():
            with open(out / "compare.csv") as fh:
                row = {r["metric"]: float(r["value"]) for r in csv.DictReader(fh)}
        print(
            f"{name:<24} {code:>4} {secs:>6.1f} {row.get('tv', float('nan')):>8.5f} "
            f"{row.get('tv_threshold', float('nan')):>6.3f} {row.get('mean_empirical', float('nan')):>8.4f} "
            f"{row.get('var_empirical', float('nan')):>8.4f} {row.get('var_model', float('nan')):>9.4f}"
        )


if __name__ == "__main__":
    main()
