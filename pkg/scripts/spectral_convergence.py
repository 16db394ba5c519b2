"""Relative error of the perturbed cocycle multiplier against (1 - e^{is}) Theta(s) / tbar.

    python3 scripts/spectral_convergence.py --scenario det-periodic --bins 16384
"""
from __future__ import annotations

import argparse

import numpy as np

from quenched_cp import scenario, spectral


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="det-periodic")
    ap.add_argument("--bins", type=int, default=2**14)
    ap.add_argument("--steps", type=int, default=spectral.STEPS)
    ap.add_argument("--leb-h", type=float, nargs="*", default=[3e-2, 1e-2, 3e-3, 1e-3])
    ap.add_argument("--s", type=float, nargs="*", default=[np.pi / 4, np.pi / 2, np.pi])
    args = ap.parse_args()

    sc = scenario.load(args.scenario)
    d, f = sc.driving(), sc.targets(snap=args.bins)
    model = scenario.build_model(sc, d, sc.targets())
    t0 = float(f.t_of(d.fiber_at(d.default_anchor(), 0)))
    print(f"{'s':>7} {'Leb(H)':>8} {'ratio':>24} {'expected':>24} {'rel err':>8}")
    for s in args.s:
        want = complex((1 - np.exp(1j * s)) * model.Theta(np.array([s]))[0] / model.tbar)
        for h in args.leb_h:
            res = spectral.cocycle_multiplier(d, f, max(2, round(t0 / h)), s, args.bins, K=args.steps)
            ratio = spectral.perturbation_ratio(res, float(np.mean(res.leb_h[res.steps // 2:])))
            print(f"{s:7.4f} {h:8.1e} {ratio:24.6f} {want:24.6f} {abs(ratio - want) / abs(want):8.4f}")


if __name__ == "__main__":
    main()
