"""Numerical verification of the sufficient conditions F1-F9 for a scenario.

All covering and preimage checks use exact interval arithmetic on the
rational maps. For the full-branch linear class the weight is
``g = 1/|T'|`` and ``L 1 = 1``, but both sides of the F8 inequality are
computed from the maps so mixed-slope cases stay covered.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from collections.abc import Sequence

from .driving import DrivingSystem
from .maps import IntervalSet, PiecewiseLinearMap, image
from .targets import TargetFamily

PASS, FAIL, NA = "pass", "fail", "not-applicable"
F8_MAX = 60
COVER_CAP = 200
DYADIC_DEPTH = 6


@dataclass
class Condition:
    name: str
    status: str
    witness: dict = field(default_factory=dict)
    note: str = ""


@dataclass
class AssumptionReport:
    conditions: dict[str, Condition]

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.conditions.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.conditions.items() if c.status == FAIL]

    def to_dict(self) -> dict:
        return {
            k: {"status": c.status, "witness": _plain(c.witness), "note": c.note}
            for k, c in self.conditions.items()
        }

    def format(self) -> str:
        lines = []
        for k, c in self.conditions.items():
            wit = ", ".join(f"{a}={_fmt(b)}" for a, b in c.witness.items())
            lines.append(f"{k:<3} {c.status:<15} {wit}" + (f"  ({c.note})" if c.note else ""))
        lines.append("overall: " + ("pass" if self.passed else "fail: " + ",".join(self.failures())))
        return "\n".join(lines)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    return x


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, Fraction):
        return f"{float(x):.6g}"
    return str(x)


# ---------------------------------------------------------------------------
# per-map quantities
# ---------------------------------------------------------------------------
def max_preimages(T: PiecewiseLinearMap) -> int:
    """``d(T) = sup_y #T^{-1}(y)`` from a sweep over branch images."""
    events = []
    for b in T.branches:
        lo, hi = b.image()
        events.append((lo, 1))
        events.append((hi, -1))
    events.sort(key=lambda e: (e[0], e[1]))
    cur = best = 0
    for _, e in events:
        cur += e
        best = max(best, cur)
    return best


def inf_transfer_one(T: PiecewiseLinearMap):
    """``inf_y L_T 1(y) = inf_y sum_{T x = y} 1/|T'(x)|``."""
    events = []
    for b in T.branches:
        lo, hi = b.image()
        w = 1 / abs(b.slope)
        events.append((lo, w))
        events.append((hi, -w))
    events.sort(key=lambda e: e[0])
    cur = 0
    best = None
    i = 0
    while i < len(events):
        x = events[i][0]
        while i < len(events) and events[i][0] == x:
            cur += events[i][1]
            i += 1
        if i < len(events) and events[i][0] > x and x < 1:
            best = cur if best is None else min(best, cur)
    return best


def f8_holds(h: int, n_prime: int, sup_g, inf_L) -> bool:
    """``(9 + 12 h N') * sup g^{(N')} < inf L^{N'} 1``."""
    return (9 + 12 * h * n_prime) * sup_g**n_prime < inf_L**n_prime


def f8_search(h: int, gamma_min, inf_L=1, cap: int = F8_MAX) -> int | None:
    """Smallest ``N'`` in ``1..cap`` satisfying F8, with ``sup g^{(N')} = gamma_min^{-N'}``."""
    g = 1 / Fraction(gamma_min) if isinstance(gamma_min, (int, Fraction)) else 1 / gamma_min
    for k in range(1, cap + 1):
        if f8_holds(h, k, g, inf_L):
            return k
    return None


def _unit(S: IntervalSet) -> bool:
    return S.covers_unit()


def covering_time(maps: Sequence[PiecewiseLinearMap], J: IntervalSet, cap: int = COVER_CAP) -> int | None:
    """Smallest ``k`` with ``T_{k-1} o ... o T_0 (J) = [0, 1]``; ``maps`` is cycled."""
    S = J
    if _unit(S):
        return 0
    for k in range(1, cap + 1):
        S = image(maps[(k - 1) % len(maps)], S)
        if _unit(S):
            return k
        if S.measure() == 0:
            return None
    return None


def cylinder_covering_time(maps: Sequence[PiecewiseLinearMap], n_prime: int, cap: int = COVER_CAP) -> int | None:
    """``k_o(N')``: max over ``N'``-cylinders of the covering time along ``maps``.

    Cylinders are tracked through their images; cylinders with equal images
    have equal covering times, so images are deduplicated at every step.
    """
    frontier = {(Fraction(0) if maps[0].exact else 0.0, Fraction(1) if maps[0].exact else 1.0)}
    for j in range(n_prime):
        T = maps[j % len(maps)]
        nxt = set()
        for lo, hi in frontier:
            for b in T.branches:
                a, c = max(lo, b.lo), min(hi, b.hi)
                if c > a:
                    y0, y1 = b(a), b(c)
                    nxt.add((min(y0, y1), max(y0, y1)))
        frontier = nxt
    worst = n_prime
    rest = list(maps[n_prime % len(maps):]) + list(maps[: n_prime % len(maps)])
    for lo, hi in frontier:
        k = covering_time(rest, IntervalSet([(lo, hi)]), cap - n_prime)
        if k is None:
            return None
        worst = max(worst, n_prime + k)
    return worst


def _probes(maps: Sequence[PiecewiseLinearMap], depth: int = DYADIC_DEPTH) -> list[IntervalSet]:
    out = []
    for m in range(depth + 1):
        for i in range(2**m):
            out.append(IntervalSet([(Fraction(i, 2**m), Fraction(i + 1, 2**m))]))
    for T in maps:
        for b in T.branches:
            out.append(IntervalSet([(b.lo, b.hi)]))
    return out


class _LazyMaps(Sequence):
    """Forward fiber maps of one anchor, built on demand."""

    def __init__(self, d: DrivingSystem, anchor, length: int):
        self.path = d.path(anchor)
        self.length = length

    def __len__(self):
        return self.length

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(self.length))]
        return self.path[j].map


def _paths(d: DrivingSystem, M: int, length: int, seed: int) -> list[Sequence[PiecewiseLinearMap]]:
    if d.kind == "fixed":
        return [[d.distinct_maps()[0]]]
    return [_LazyMaps(d, anchor, length) for anchor, _ in d.sample_fibers(M, seed)]


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------
def check_all(
    d: DrivingSystem,
    f: TargetFamily,
    maps: Sequence[PiecewiseLinearMap] | None = None,
    n_grid: Sequence[int] = (100, 1000, 10000, 100000),
    M: int = 8,
    seed: int = 0,
) -> AssumptionReport:
    maps = list(maps) if maps is not None else d.distinct_maps(64, seed)
    paths = _paths(d, M, COVER_CAP, seed)
    fibers = [d.fiber_at(a, 0) for a, _ in d.sample_fibers(M, seed)]
    C: dict[str, Condition] = {}

    sup_slope = max(max(abs(s) for s in T.slopes) for T in maps)
    d_max = max(max_preimages(T) for T in maps)
    C["F1"] = Condition("F1", PASS, {"sup|T'|": sup_slope, "d(T)": d_max, "C": max(sup_slope, d_max)})

    gamma_min = min(T.gamma_min for T in maps)
    sup_g = 1 / gamma_min
    C["F2"] = Condition("F2", PASS if gamma_min > 0 else FAIL, {"sup g": sup_g})
    inf_g = 1 / sup_slope
    C["F3"] = Condition("F3", PASS if inf_g > 0 else FAIL, {"inf g": inf_g})

    probes = _probes(maps)
    worst_k, bad = 0, 0
    for J in probes:
        ks = [covering_time(p, J) for p in paths]
        if any(k is None for k in ks):
            bad += 1
        else:
            worst_k = max(worst_k, max(ks))
    C["F4"] = Condition(
        "F4", PASS if bad == 0 else FAIL,
        {"probes": len(probes), "paths": len(paths), "max k(J)": worst_k, "uncovered": bad},
    )

    h = f.h_bound
    comp_max = 0
    for fib in fibers:
        for n in n_grid:
            try:
                comp_max = max(comp_max, len(f.at(fib, n).set))
            except ValueError:
                continue
    C["F5"] = Condition("F5", PASS if comp_max <= h else FAIL, {"h": h, "max components": comp_max})

    decay = {}
    for n in n_grid:
        vals = []
        for fib in fibers:
            try:
                vals.append(float(f.at(fib, n).set.measure()))
            except ValueError:
                vals.append(1.0)
        decay[n] = max(vals)
    seq = [decay[n] for n in n_grid]
    ok6 = all(b <= a for a, b in zip(seq, seq[1:])) and seq[-1] * n_grid[-1] <= 2 * max(seq[0] * n_grid[0], 1e-300)
    C["F6"] = Condition("F6", PASS if ok6 else FAIL, {"sup Leb(H_n)": decay})

    f7 = {}
    for n in n_grid:
        good = True
        for fib in fibers:
            try:
                H = f.at(fib, n).set
            except ValueError:
                good = False
                break
            if not image(fib.map, H.complement()).covers_unit():
                good = False
                break
        f7[n] = good
    from_n = next((n for i, n in enumerate(n_grid) if all(f7[m] for m in n_grid[i:])), None)
    C["F7"] = Condition("F7", PASS if from_n is not None else FAIL, {"holds from n": from_n})

    inf_L = min(inf_transfer_one(T) for T in maps)
    n_prime = f8_search(h, gamma_min, inf_L)
    wit8 = {"h": h, "gamma_min": gamma_min, "inf L1": inf_L, "N'": n_prime}
    if n_prime is not None:
        wit8["lhs"] = float((9 + 12 * h * n_prime) * sup_g**n_prime)
        wit8["rhs"] = float(inf_L**n_prime)
    C["F8"] = Condition("F8", PASS if n_prime is not None else FAIL, wit8)

    if n_prime is None:
        C["F9"] = Condition("F9", NA, note="no N' from F8")
    else:
        ks = [cylinder_covering_time(p, n_prime) for p in paths]
        ok = all(k is not None for k in ks)
        C["F9"] = Condition(
            "F9", PASS if ok else FAIL,
            {"N'": n_prime, "k_o(N')": max(ks) if ok else None, "paths": len(paths)},
        )
    return AssumptionReport(C)


def check_simple_point(maps, x0, horizon: int) -> tuple[bool, int | None]:
    """Iterate ``x0`` exactly; fail at the first step landing on an interior breakpoint."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    maps = [maps] if isinstance(maps, PiecewiseLinearMap) else list(maps)
    x = x0
    for j in range(horizon):
        T = maps[j % len(maps)]
        if x in T.breakpoints[1:-1]:
            return False, j
        x = T(x)
    return True, None
