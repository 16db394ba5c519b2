"""Limiting compound-Poisson law: CF, pmf routes, moments, jump law and sampler."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .ei import NumericalGuardError, ThetaMixture

DEFAULT_GRID = 4096
SHARD = 1 << 16


@dataclass(frozen=True)
class CompoundPoissonModel:
    """``phi(s) = exp(-(1 - e^{is}) Theta(s))``.

    ``vartheta`` is the Poisson rate of clusters, ``tbar`` the mean of ``Z`` and
    ``sigma_bar`` its variance. ``jump_pmf`` optionally pins a closed-form law of
    ``X_1`` (index = jump size, entry 0 is zero).
    """

    Theta: Callable[[np.ndarray], np.ndarray]
    vartheta: float
    tbar: float
    sigma_bar: float
    jump_pmf: np.ndarray | None = field(default=None, compare=False)
    tag: str = ""

    def cf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.exp(-(1 - np.exp(1j * s)) * self.Theta(s))

    def scaled(self, c: float) -> "CompoundPoissonModel":
        """Model with ``Theta -> c * Theta`` (the ``c``-th convolution power)."""
        Th = self.Theta
        return replace(
            self,
            Theta=lambda s: c * Th(s),
            vartheta=c * self.vartheta,
            tbar=c * self.tbar,
            sigma_bar=c * self.sigma_bar,
        )


def cf(model: CompoundPoissonModel, s) -> np.ndarray:
    return model.cf(s)


def from_mixture(mix: ThetaMixture, tag: str = "", jump_pmf=None) -> CompoundPoissonModel:
    return CompoundPoissonModel(mix.Theta, mix.vartheta, mix.tbar, mix.sigma_bar, jump_pmf, tag)


def poisson_model(t: float) -> CompoundPoissonModel:
    t = float(t)
    jump = np.array([0.0, 1.0])
    return CompoundPoissonModel(
        lambda s: t + 0 * np.asarray(s, dtype=complex), t, t, t, jump, "poisson"
    )


def geometric_jump(rho: float, k_max: int) -> np.ndarray:
    k = np.arange(k_max + 1)
    out = np.where(k >= 1, (1 - rho) * rho ** np.maximum(k - 1, 0), 0.0)
    return out


def polya_aeppli_model(vartheta: float, rho: float, k_max: int = 400) -> CompoundPoissonModel:
    """Geometric-jump compound Poisson with ``P(X = k) = (1 - rho) rho^{k-1}``."""
    v, r = float(vartheta), float(rho)
    tbar = v / (1 - r)
    return CompoundPoissonModel(
        lambda s: v / (1 - r * np.exp(1j * np.asarray(s, dtype=float))),
        v, tbar, tbar * (1 + r) / (1 - r), geometric_jump(r, k_max), "polya-aeppli",
    )


def _lattice_invert(phi_values: np.ndarray) -> np.ndarray:
    """``(1/G) sum_g phi(2 pi g / G) e^{-2 pi i g k / G}`` for ``k < G``."""
    return np.fft.fft(phi_values).real / len(phi_values)


def pmf_levy(model: CompoundPoissonModel, k_max: int, G: int = DEFAULT_GRID) -> np.ndarray:
    """``P(Z = k)`` for ``k <= k_max`` by lattice inversion of the CF."""
    if G < 4 * k_max:
        raise ValueError(f"grid size G={G} must be at least 4*k_max={4 * k_max}")
    s = 2 * np.pi * np.arange(G) / G
    p = _lattice_invert(model.cf(s))[: k_max + 1]
    if p.min() < -1e-9:
        raise NumericalGuardError(f"inverted pmf has negative mass {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    if p.sum() < 1 - 1e-6:
        raise NumericalGuardError(f"pmf mass {p.sum():.8f} < 1 - 1e-6; raise k_max")
    return p


def pmf_polya_aeppli(vartheta: float, rho: float, k_max: int) -> np.ndarray:
    """Closed-form geometric-Poisson pmf."""
    v, r = float(vartheta), float(rho)
    out = np.zeros(k_max + 1)
    out[0] = math.exp(-v)
    for k in range(1, k_max + 1):
        acc = 0.0
        for j in range(1, k + 1):
            log_term = j * math.log(v) - math.lgamma(j + 1) + math.log(math.comb(k - 1, j - 1))
            acc += math.exp(log_term) * r ** (k - j) * (1 - r) ** j
        out[k] = math.exp(-v) * acc
    return out


def pmf_poisson(t: float, k_max: int) -> np.ndarray:
    return pmf_polya_aeppli(t, 0.0, k_max)


def pmf_pgf(model: CompoundPoissonModel, k_max: int, jump: np.ndarray | None = None) -> np.ndarray:
    """``P(Z = K) = e^{-v} sum_k v^k / k! [z^K] g(z)^k`` from the jump pmf ``g``."""
    if jump is None:
        jump = model.jump_pmf if model.jump_pmf is not None else x1_law(model, k_max).pmf
    g = np.zeros(k_max + 1)
    m = min(len(jump), k_max + 1)
    g[:m] = jump[:m]
    g[0] = 0.0
    v = model.vartheta
    out = np.zeros(k_max + 1)
    power = np.zeros(k_max + 1)
    power[0] = 1.0
    log_w = -v
    for k in range(k_max + 1):
        if k > 0:
            power = np.convolve(power, g)[: k_max + 1]
            log_w += math.log(v) - math.log(k) if v > 0 else -math.inf
        if log_w == -math.inf:
            break
        out += math.exp(log_w) * power
    return out


@dataclass(frozen=True)
class JumpLaw:
    pmf: np.ndarray
    mass_at_zero: float
    negative_mass: float
    renormalised_by: float


def x1_law(model: CompoundPoissonModel, k_max: int, G: int | None = None) -> JumpLaw:
    """Law of ``X_1`` by inverting ``phi_X(s) = (e^{is} - 1) Theta(s) / vartheta + 1``."""
    if model.vartheta <= 0:
        raise ValueError("vartheta must be positive")
    G = G or max(DEFAULT_GRID, 4 * k_max)
    s = 2 * np.pi * np.arange(G) / G
    phi = (np.exp(1j * s) - 1) * model.Theta(s) / model.vartheta + 1
    p = _lattice_invert(phi)[: k_max + 1]
    p0 = float(p[0])
    if abs(p0) > 1e-6:
        raise NumericalGuardError(f"jump law has mass {p0:.3e} at zero; model inconsistent")
    p[0] = 0.0
    neg = float(min(p.min(), 0.0))
    if neg < -1e-6:
        raise NumericalGuardError(f"jump law has negative mass {neg:.3e}")
    p = np.clip(p, 0.0, None)
    total = float(p.sum())
    return JumpLaw(p / total, p0, neg, total)


def moments(model: CompoundPoissonModel) -> tuple[float, float, float, float]:
    """``(E Z, Var Z, E X_1, Var X_1)``."""
    if model.vartheta <= 0:
        raise ValueError("vartheta must be positive")
    v = model.vartheta
    ex = model.tbar / v
    return model.tbar, model.sigma_bar, ex, model.sigma_bar / v - ex**2


def _jump_for_sampling(model: CompoundPoissonModel, k_max: int = 512) -> np.ndarray:
    if model.jump_pmf is not None:
        g = np.asarray(model.jump_pmf, dtype=float).copy()
    else:
        g = x1_law(model, k_max).pmf
    g[0] = 0.0
    return g / g.sum()


def _shard(v: float, cdf: np.ndarray, size: int, seed: int, index: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))
    N = rng.poisson(v, size)
    total = int(N.sum())
    jumps = np.searchsorted(cdf, rng.random(total), side="right")
    owner = np.repeat(np.arange(size), N)
    Z = np.bincount(owner, weights=jumps, minlength=size).astype(np.int64)
    return np.bincount(Z)


def sample(model: CompoundPoissonModel, count: int, seed: int = 0, workers: int = 1) -> np.ndarray:
    """Counts ``c[k] = #{Z = k}`` over ``count`` draws; independent of ``workers``."""
    g = _jump_for_sampling(model)
    cdf = np.cumsum(g)
    cdf[-1] = 1.0
    sizes = [SHARD] * (count // SHARD) + ([count % SHARD] if count % SHARD else [])
    jobs = [(model.vartheta, cdf, size, seed, i) for i, size in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _shard(*a), jobs))
    else:
        parts = [_shard(*a) for a in jobs]
    out = np.zeros(max((len(p) for p in parts), default=1), dtype=np.int64)
    for p in parts:
        out[: len(p)] += p
    return out


def mass_cutoff(model: CompoundPoissonModel, coverage: float = 1 - 1e-4, k_cap: int = 4000) -> int:
    """Smallest ``k_max`` whose lattice pmf covers ``coverage`` of the mass."""
    k = 16
    while k <= k_cap:
        p = _lattice_invert(model.cf(2 * np.pi * np.arange(max(DEFAULT_GRID, 4 * k)) / max(DEFAULT_GRID, 4 * k)))
        if p[: k + 1].sum() >= coverage:
            return k
        k *= 2
    return k_cap


def self_convolution_gap(model: CompoundPoissonModel, k_max: int | None = None, G: int | None = None) -> float:
    """``max |pmf(Theta) - pmf(Theta/2) * pmf(Theta/2)|`` over ``k <= k_max``.

    ``k_max`` defaults to the point covering all but ``1e-9`` of the mass.
    """
    k_max = mass_cutoff(model, 1 - 1e-9) if k_max is None else k_max
    G = G or max(DEFAULT_GRID, 4 * k_max)
    full = pmf_levy(model, k_max, G)
    half = pmf_levy(model.scaled(0.5), k_max, G)
    conv = np.convolve(half, half)[: k_max + 1]
    return float(np.max(np.abs(full - conv)))
