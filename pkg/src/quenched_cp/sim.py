"""Monte Carlo orbit counting and model comparison.

Orbits are iterated in double precision by a compiled kernel. Maps with
dyadic slopes and intercepts (e.g. slopes 2 and 4) shift one or two mantissa
bits out per step, so a raw floating-point orbit collapses onto a dyadic
periodic point within about 30 steps. Each step therefore adds a uniform
dither of width ``2^-40`` taken mod 1. Lebesgue measure stays invariant
under this noise, and the noise is far below the target scale.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .cpmodel import CompoundPoissonModel, DEFAULT_GRID, mass_cutoff, pmf_levy
from .driving import DrivingSystem
from .targets import TargetFamily, target_arrays

DITHER = 2.0**-40
SHARD = 1 << 15


@numba.njit(cache=True, inline="always")
def _splitmix(state):
    z = state + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True, fastmath=False, error_model="numpy")
def _count_kernel(bps, slopes, icpts, nbr, map_idx, tlo, thi, tcnt, key, start, count,
                  dither, keep, cap, hits_out, nhits_out, S_out):
    n = map_idx.shape[0]
    x = np.empty(count)
    state = np.empty(count, dtype=np.uint64)
    for i in range(count):
        g = np.uint64(start + i)
        s0 = _splitmix(key ^ (g * np.uint64(0xD1B54A32D192ED03)))
        x[i] = np.int64(_splitmix(s0) >> np.uint64(11)) * 2.0**-53
        state[i] = s0 | np.uint64(1)
        S_out[i] = 0
    for j in range(n):
        m = map_idx[j]
        nb = nbr[m]
        for c in range(tcnt[j]):
            lo = tlo[j, c]
            hi = thi[j, c]
            for i in range(count):
                S_out[i] += (lo <= x[i]) & (x[i] < hi)
        for i in range(keep):
            if S_out[i] > nhits_out[i] and nhits_out[i] < cap:
                hits_out[i, nhits_out[i]] = j
                nhits_out[i] += 1
        if nb == 1:
            sl = slopes[m, 0]
            ic = icpts[m, 0]
            for i in range(count):
                x[i] = sl * x[i] + ic
        else:
            for i in range(count):
                b = 0
                for q in range(1, nb):
                    b += x[i] >= bps[m, q]
                x[i] = slopes[m, b] * x[i] + icpts[m, b]
        if dither > 0.0:
            for i in range(count):
                s = state[i]
                s ^= s << np.uint64(13)
                s ^= s >> np.uint64(7)
                s ^= s << np.uint64(17)
                state[i] = s
                x[i] += dither * (np.int64(s >> np.uint64(11)) * 2.0**-53 - 0.5)
        for i in range(count):
            x[i] -= np.floor(x[i])


@dataclass
class HitCountDistribution:
    """Empirical law of ``S_{omega,n,n}`` under Lebesgue initial conditions."""

    n: int
    samples: int
    counts: np.ndarray
    seed: int
    anchor: str
    s_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cf: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    patterns: list | None = None

    @property
    def pmf(self) -> np.ndarray:
        return self.counts / self.samples

    def empirical_cf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        k = np.arange(len(self.counts))
        return (np.exp(1j * np.outer(s, k)) @ self.counts) / self.samples

    def mean_var(self) -> tuple[float, float]:
        k = np.arange(len(self.counts))
        p = self.pmf
        m = float(k @ p)
        return m, float((k - m) ** 2 @ p)

    def moment_standard_errors(self) -> tuple[float, float]:
        """Standard errors of the sample mean and variance (fourth-moment delta method)."""
        k = np.arange(len(self.counts))
        m, v = self.mean_var()
        m4 = float((k - m) ** 4 @ self.pmf)
        return float(np.sqrt(v / self.samples)), float(np.sqrt(max(m4 - v * v, 0.0) / self.samples))


def _tables(d: DrivingSystem, f: TargetFamily, anchor, n: int):
    path = d.path(anchor)
    fibers = path.window(0, n)
    index: dict = {}
    idx = np.empty(n, dtype=np.int64)
    for j, fib in enumerate(fibers):
        idx[j] = index.setdefault(fib.map, len(index))
    maps = list(index)
    B = max(len(T.branches) for T in maps)
    bps = np.full((len(maps), B + 1), 2.0)
    sl = np.zeros((len(maps), B))
    ic = np.zeros((len(maps), B))
    nbr = np.zeros(len(maps), dtype=np.int64)
    for m, T in enumerate(maps):
        bp, s, c = T.tables()
        bps[m, : len(bp)] = bp
        sl[m, : len(s)] = s
        ic[m, : len(c)] = c
        nbr[m] = len(s)
    tlo, thi, tcnt = target_arrays(f, path, n, range(n))
    return bps, sl, ic, nbr, idx, tlo, thi, tcnt


def orbit_counts(
    d: DrivingSystem, f: TargetFamily, anchor, n: int, samples: int, seed: int = 0,
    workers: int = 1, keep: int = 0, cap: int = 64, dither: float = DITHER,
):
    """Per-sample hit counts plus hit times of the first ``keep`` samples."""
    tabs = _tables(d, f, anchor, n)
    key = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    S = np.zeros(samples, dtype=np.int64)
    hits = np.zeros((max(keep, 1), cap), dtype=np.int64)
    nhits = np.zeros(max(keep, 1), dtype=np.int64)
    starts = list(range(0, samples, SHARD))

    def run(start):
        cnt = min(SHARD, samples - start)
        k = max(0, min(keep - start, cnt))
        h = np.zeros((max(k, 1), cap), dtype=np.int64)
        nh = np.zeros(max(k, 1), dtype=np.int64)
        out = np.zeros(cnt, dtype=np.int64)
        _count_kernel(*tabs, key, start, cnt, dither, k, cap, h, nh, out)
        return start, cnt, k, h, nh, out

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(s) for s in starts]
    for start, cnt, k, h, nh, out in results:
        S[start : start + cnt] = out
        if k:
            hits[start : start + k] = h[:k]
            nhits[start : start + k] = nh[:k]
    patterns = [hits[i, : nhits[i]].copy() for i in range(keep)] if keep else None
    return S, patterns


def simulate(
    d: DrivingSystem, f: TargetFamily, anchor=None, n: int = 2000, samples: int = 10**6,
    seed: int = 0, s_grid=None, workers: int = 1, keep_patterns: int = 0,
    dither: float = DITHER,
) -> HitCountDistribution:
    """Draw ``x ~ Leb``, iterate the fiber cocycle ``n`` steps, count target hits."""
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be positive")
    anchor = d.default_anchor() if anchor is None else anchor
    S, patterns = orbit_counts(d, f, anchor, n, samples, seed, workers, keep_patterns, dither=dither)
    counts = np.bincount(S).astype(np.int64)
    s_grid = np.zeros(0) if s_grid is None else np.asarray(s_grid, dtype=float)
    dist = HitCountDistribution(n, samples, counts, seed, str(anchor), s_grid, patterns=patterns)
    dist.cf = dist.empirical_cf(s_grid)
    return dist


@dataclass
class CompareReport:
    tv: float
    cf_sup: float
    z: np.ndarray
    k_max: int
    model_pmf: np.ndarray
    empirical_pmf: np.ndarray

    def rows(self):
        for k in range(self.k_max + 1):
            yield k, self.empirical_pmf[k], self.model_pmf[k], self.z[k]


def model_pmf_for(model: CompoundPoissonModel, k_min: int = 0) -> np.ndarray:
    k = max(mass_cutoff(model, 1 - 1e-9), k_min, 8)
    return pmf_levy(model, k, max(DEFAULT_GRID, 4 * k))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    m = max(len(p), len(q))
    a = np.zeros(m)
    b = np.zeros(m)
    a[: len(p)] = p
    b[: len(q)] = q
    tail = max(0.0, 1 - b.sum()) + max(0.0, 1 - a.sum())
    return 0.5 * float(np.abs(a - b).sum() + tail)


def compare(dist: HitCountDistribution, model: CompoundPoissonModel, s_grid=None) -> CompareReport:
    """Total variation, sup CF distance and per-``k`` z-scores."""
    emp = dist.pmf
    mod = model_pmf_for(model, len(emp) - 1)
    K = len(mod) - 1
    e = np.zeros(K + 1)
    e[: len(emp)] = emp
    tv = total_variation(e, mod)
    se = np.sqrt(np.maximum(mod * (1 - mod), 1e-300) / dist.samples)
    z = (e - mod) / se
    grid = dist.s_grid if s_grid is None else np.asarray(s_grid, dtype=float)
    if grid.size == 0:
        grid = np.linspace(-np.pi, np.pi, 65)
    cf_sup = float(np.max(np.abs(dist.empirical_cf(grid) - model.cf(grid))))
    return CompareReport(tv, cf_sup, z, K, mod, e)


def cluster_diagnostics(patterns, cap: int = 20) -> np.ndarray:
    """Histogram of gap-1 cluster sizes; entry ``c`` counts clusters of size ``c``.

    The last entry collects every cluster of size ``cap`` or more.
    """
    hist = np.zeros(cap + 1, dtype=np.int64)
    for times in patterns or ():
        if len(times) == 0:
            continue
        run = 1
        for a, b in zip(times[:-1], times[1:]):
            if b - a == 1:
                run += 1
            else:
                hist[min(run, cap)] += 1
                run = 1
        hist[min(run, cap)] += 1
    return hist


def beta_monte_carlo(
    d: DrivingSystem, f: TargetFamily, anchor, n: int, k: int, samples: int = 10**6, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate ``beta_{omega,n}^{(k)}(l)`` from points drawn uniformly in the start target.

    Returns estimates and binomial standard errors for ``l = 0..k``.
    """
    path = d.path(anchor)
    H_start = f.at(path[-(k + 1)], n).set.to_float()
    H_end = f.at(path[0], n).set.to_float()
    if H_end.measure() == 0 or H_start.measure() == 0:
        return np.zeros(k + 1), np.zeros(k + 1)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    lo = np.array([a for a, _ in H_start])
    w = np.array([b - a for a, b in H_start])
    comp = rng.choice(len(w), size=samples, p=w / w.sum())
    x = lo[comp] + w[comp] * rng.random(samples)
    hits = np.zeros(samples, dtype=np.int64)
    for j in range(-(k + 1), 0):
        x = path[j].map.eval_array(x)
        x -= np.floor(x)
        if j < -1:
            H = f.at(path[j + 1], n).set.to_float()
            inside = np.zeros(samples, dtype=bool)
            for a, b in H:
                inside |= (x >= a) & (x < b)
            hits += inside
    end = np.zeros(samples, dtype=bool)
    for a, b in H_end:
        end |= (x >= a) & (x < b)
    ratio = H_start.measure() / H_end.measure()
    est = np.zeros(k + 1)
    se = np.zeros(k + 1)
    for l in range(k + 1):
        p = float(np.mean(end & (hits == l)))
        est[l] = ratio * p
        se[l] = ratio * np.sqrt(p * (1 - p) / samples)
    return est, se
