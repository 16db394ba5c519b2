"""Exact short-return mass sigma_n = sum_{k <= K} sum_l beta_n^(k)(l) against n, per preset.

Large jumps between grid points flag near-returns of the target center that
inflate the finite-n variance of the hit count.

    python3 scripts/finite_n_bias.py --K 8 --n 2000 5000 10000 20000
"""
from __future__ import annotations

import argparse

from quenched_cp import ei, scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--n", type=int, nargs="*", default=[2000, 5000, 10000, 20000])
    ap.add_argument("--only", nargs="*", default=None)
    args = ap.parse_args()

    print(f"{'preset':<24}" + "".join(f"{n:>12}" for n in args.n))
    for name in args.only or scenario.preset_names():
        sc = scenario.load(name)
        d, f = sc.driving(), sc.targets()
        sig = [ei.beta_exact(d, f, n=n, K=args.K).sigma for n in args.n]
        print(f"{name:<24}" + "".join(f"{v:12.6f}" for v in sig))


if __name__ == "__main__":
    main()
