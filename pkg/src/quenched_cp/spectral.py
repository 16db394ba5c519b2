"""Ulam discretization of the transfer-operator cocycle and its twisted version.

Densities are stored as bin masses (row vectors). One step of the twisted
operator multiplies each source bin by ``frac_i e^{is} + 1 - frac_i`` and then
pushes the mass with the row-stochastic Ulam matrix. Lebesgue measure is the
conformal functional for this class, so the per-step multiplier is the ratio of
total masses.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .driving import DrivingSystem
from .maps import IntervalSet, PiecewiseLinearMap
from .targets import TargetFamily

DEFAULT_BINS = 2**14
BURN_IN = 50
STEPS = 200
UNDERFLOW = 1e-300


class SpectralFailure(ArithmeticError):
    """Pushed density underflowed or became non-finite."""


@dataclass(frozen=True)
class UlamOperator:
    """Sparse ``N x N`` matrix ``P[i, j] = Leb(B_i & T^-1 B_j) / Leb(B_i)`` with an optional twist."""

    N: int
    matrix: sp.csr_matrix
    twist: np.ndarray | None = None

    def push(self, mass: np.ndarray) -> np.ndarray:
        """One step of the (twisted) operator on bin masses."""
        if self.twist is not None:
            mass = mass * self.twist
        return self.matrix.T @ mass

    def twisted_matrix(self) -> sp.csr_matrix:
        if self.twist is None:
            return self.matrix
        return sp.diags(self.twist) @ self.matrix

    def with_twist(self, H: IntervalSet | None, s: float) -> "UlamOperator":
        return UlamOperator(self.N, self.matrix, bin_twist(self.N, H, s))


def _ulam_matrix(T: PiecewiseLinearMap, N: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    edges = np.arange(N + 1) / N
    for br in T.to_float().branches:
        a, c = float(br.slope), float(br.intercept)
        lo, hi = float(br.lo), float(br.hi)
        i0, i1 = int(np.floor(lo * N)), int(np.ceil(hi * N))
        src = np.arange(i0, min(i1, N))
        x0 = np.maximum(edges[src], lo)
        x1 = np.minimum(edges[src + 1], hi)
        keep = x1 > x0
        src, x0, x1 = src[keep], x0[keep], x1[keep]
        y0, y1 = a * x0 + c, a * x1 + c
        y0, y1 = np.minimum(y0, y1), np.maximum(y0, y1)
        j0 = np.clip(np.floor(y0 * N).astype(np.int64), 0, N - 1)
        j1 = np.clip(np.ceil(y1 * N).astype(np.int64), j0 + 1, N)
        span = j1 - j0
        r = np.repeat(src, span)
        offs = np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span)
        col = np.repeat(j0, span) + offs
        ov = np.minimum(np.repeat(y1, span), edges[col + 1]) - np.maximum(np.repeat(y0, span), edges[col])
        ok = ov > 0
        rows.append(r[ok])
        cols.append(col[ok])
        vals.append(ov[ok] * N / abs(a))
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    M.sum_duplicates()
    return M


def bin_twist(N: int, H: IntervalSet | None, s: float) -> np.ndarray | None:
    """Per-bin factor ``frac_i e^{is} + 1 - frac_i`` with ``frac_i = N Leb(B_i & H)``."""
    if H is None or s == 0:
        return None
    frac = np.zeros(N)
    for a, b in H.to_float():
        i0, i1 = int(np.floor(a * N)), min(int(np.ceil(b * N)), N)
        idx = np.arange(i0, i1)
        frac[idx] += np.clip(np.minimum(b, (idx + 1) / N) - np.maximum(a, idx / N), 0, None) * N
    return frac * np.exp(1j * s) + (1 - frac)


def build_ulam(T: PiecewiseLinearMap, N: int = DEFAULT_BINS, twist: tuple[IntervalSet, float] | None = None) -> UlamOperator:
    """Ulam operator of ``T`` on ``N`` equal bins, optionally twisted by ``(H, s)``."""
    if N < 2:
        raise ValueError("N must be at least 2")
    op = UlamOperator(N, _ulam_matrix(T, N))
    return op.with_twist(*twist) if twist is not None else op


def leading_eigenvalue(op: UlamOperator, method: str = "dense") -> complex:
    """Eigenvalue of largest modulus of the (twisted) matrix; ``dense`` or ``arpack``."""
    A = op.twisted_matrix()
    if method == "dense":
        ev = np.linalg.eigvals(A.toarray())
    else:
        ev = spla.eigs(A.T.astype(complex), k=1, which="LM", return_eigenvectors=False, tol=1e-12)
    return complex(ev[np.argmax(np.abs(ev))])


def dump_coo(op: UlamOperator, path) -> None:
    """Write the twisted matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(op.twisted_matrix()))


@dataclass
class CocycleSpectralResult:
    s: float
    n: int
    multipliers: np.ndarray
    log_product: complex
    leb_h: np.ndarray
    residuals: np.ndarray
    snapshots: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.multipliers)

    def product(self) -> complex:
        return complex(np.exp(self.log_product))

    def geometric_mean(self, discard: float = 0.5) -> complex:
        """Geometric mean over the steps after the first ``discard`` fraction."""
        start = min(int(self.steps * discard), self.steps - 1)
        lm = np.log(self.multipliers[start:].astype(complex))
        return complex(np.exp(lm.mean()))


def cocycle_multiplier(
    d: DrivingSystem,
    f: TargetFamily,
    n: int,
    s: float,
    N: int = DEFAULT_BINS,
    burn_in: int = BURN_IN,
    K: int = STEPS,
    anchor=None,
    snapshot_every: int = 0,
) -> CocycleSpectralResult:
    """Push a density ``burn_in`` untwisted steps, then ``K`` twisted steps, recording mass ratios."""
    if K < 1:
        raise ValueError("K must be at least 1")
    path = d.path(anchor)
    cache: dict[PiecewiseLinearMap, UlamOperator] = {}

    def op_for(j):
        T = path[j].map
        op = cache.get(T)
        if op is None:
            op = cache[T] = build_ulam(T, N)
        return op

    mass = np.full(N, 1.0 / N, dtype=complex)
    for j in range(-burn_in, 0):
        mass = op_for(j).push(mass)
        mass /= mass.sum()
    lam = np.empty(K, dtype=complex)
    leb = np.empty(K)
    res = np.empty(K)
    snaps = {}
    log_prod = 0j
    for j in range(K):
        H = f.at(path[j], n).set
        leb[j] = float(H.measure())
        new = op_for(j).with_twist(H, s).push(mass)
        total = new.sum()
        if not np.isfinite(total) or abs(total) < UNDERFLOW:
            raise SpectralFailure(f"density mass {abs(total):.3e} at step {j}")
        lam[j] = total
        log_prod += np.log(complex(total))
        new /= total
        res[j] = float(np.abs(new - mass).sum())
        mass = new
        if snapshot_every and (j % snapshot_every == 0 or j == K - 1):
            snaps[j] = (mass * N).copy()
    return CocycleSpectralResult(s, n, lam, log_prod, leb, res, snaps)


def perturbation_ratio(result: CocycleSpectralResult, leb_h: float | None = None, discard: float = 0.5) -> complex:
    """``(1 - lambda_geo) / Leb(H)``; compare with ``(1 - e^{is}) theta(s)``."""
    h = float(np.mean(result.leb_h)) if leb_h is None else float(leb_h)
    if h <= 0:
        raise ZeroDivisionError("Leb(H) must be positive")
    return (1 - result.geometric_mean(discard)) / h


def eta_bound(lam0: float, s: float, leb_h: float, K_omega: float = 2.0) -> float:
    """``K_omega * lam0 * |1 - e^{is}| * Leb(H)``."""
    if min(lam0, leb_h, K_omega) < 0:
        raise ValueError("inputs must be nonnegative")
    return float(K_omega * lam0 * abs(1 - np.exp(1j * s)) * leb_h)
