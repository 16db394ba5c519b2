"""Cluster quantities ``beta``, the extremal-index function ``theta(s)`` and ``Theta(s)``.

Exact finite-``n`` cluster measures are computed by pushing piecewise-constant
densities forward with the transfer operator of each fiber map. Each density
is split at every intermediate time into a part inside and a part outside the
target, and the two parts are tagged with their running hit count ``l``.
Because every point has a single forward image, the number of density pieces
grows only linearly with the lag.
"""
from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .driving import DrivingSystem, Fiber, Fixed, IIDShift
from .maps import IntervalSet, Number, PiecewiseLinearMap
from .targets import TargetFamily

FRAGMENT_LIMIT = 10**7
SERIES_TOL = 1e-10
MAX_LAG = 60


class NumericalGuardError(RuntimeError):
    """A numerical safety guard tripped (fragment explosion, lost mass, ...)."""


# ---------------------------------------------------------------------------
# piecewise-constant densities
# ---------------------------------------------------------------------------
Pieces = list  # list of (a, b, value), sorted, disjoint, value != 0


def _sweep(events: list[tuple[Number, Number]], exact: bool) -> Pieces:
    if not events:
        return []
    events.sort(key=lambda e: e[0])
    scale = max(abs(e[1]) for e in events)
    tiny = 0 if exact else 1e-13 * scale
    out: Pieces = []
    cur = 0
    i, m = 0, len(events)
    while i < m:
        x = events[i][0]
        while i < m and events[i][0] == x:
            cur += events[i][1]
            i += 1
        if i < m and abs(cur) > tiny:
            nxt = events[i][0]
            if out and out[-1][1] == x and out[-1][2] == cur:
                out[-1] = (out[-1][0], nxt, cur)
            else:
                out.append((x, nxt, cur))
    return out


def push_density(T: PiecewiseLinearMap, pieces: Pieces) -> Pieces:
    """Transfer operator of ``T`` applied to a piecewise-constant density."""
    bps = T.breakpoints
    events = []
    for a, b, v in pieces:
        i0 = max(bisect.bisect_right(bps, a) - 1, 0)
        for br in T.branches[i0:]:
            if br.lo >= b:
                break
            lo, hi = max(a, br.lo), min(b, br.hi)
            if hi <= lo:
                continue
            y0, y1 = br(lo), br(hi)
            if y0 > y1:
                y0, y1 = y1, y0
            w = v / abs(br.slope)
            events.append((y0, w))
            events.append((y1, -w))
    return _sweep(events, T.exact)


def restrict(pieces: Pieces, S: IntervalSet, inside: bool = True) -> Pieces:
    """Density times ``1_S`` (or ``1_{S^c}`` when ``inside`` is false)."""
    if not inside:
        S = S.complement()
    out = []
    iv = S.intervals
    for a, b, v in pieces:
        k = max(bisect.bisect_right(iv, (a, a)) - 1, 0)
        while k < len(iv) and iv[k][0] < b:
            lo, hi = max(a, iv[k][0]), min(b, iv[k][1])
            if hi > lo:
                out.append((lo, hi, v))
            k += 1
    return out


def integrate(pieces: Pieces, S: IntervalSet | None = None) -> Number:
    if S is None:
        return sum((v * (b - a) for a, b, v in pieces), 0)
    return integrate(restrict(pieces, S))


# ---------------------------------------------------------------------------
# beta tables
# ---------------------------------------------------------------------------
@dataclass
class BetaTable:
    """``rows[k][l] = beta^{(k)}(l)`` for ``0 <= l <= k <= K``.

    ``n`` is the target index, or ``None`` for extrapolated limits.
    """

    rows: list[list[Number]]
    n: int | None = None
    exact: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.rows) - 1

    def row(self, k: int) -> np.ndarray:
        return np.array([float(v) for v in self.rows[k]])

    @property
    def sigma(self) -> float:
        return float(sum(sum(r) for r in self.rows))

    def cluster_coefficients(self) -> np.ndarray:
        """``b_l = sum_k beta^{(k)}(l)``: coefficients of the cluster generating function."""
        b = np.zeros(self.K + 1)
        for r in self.rows:
            b[: len(r)] += [float(v) for v in r]
        return b

    def matrix(self) -> np.ndarray:
        M = np.zeros((self.K + 1, self.K + 1))
        for k, r in enumerate(self.rows):
            M[k, : len(r)] = [float(v) for v in r]
        return M


def _split_step(dens: list[Pieces], H: IntervalSet) -> list[Pieces]:
    """Tag a hit at this time: class ``l`` outside H stays, inside moves to ``l+1``."""
    out: list[Pieces] = [[] for _ in range(len(dens) + 1)]
    for l, p in enumerate(dens):
        if not p:
            continue
        out[l].extend(restrict(p, H, inside=False))
        out[l + 1].extend(restrict(p, H, inside=True))
    while out and not out[-1]:
        out.pop()
    return out


def _guard(dens: list[Pieces]) -> None:
    total = sum(len(p) for p in dens)
    if total > FRAGMENT_LIMIT:
        raise NumericalGuardError(f"fragment count {total} exceeds {FRAGMENT_LIMIT}")


def _one_lag(path, family: TargetFamily, n: int, k: int) -> list[Number]:
    """``beta^{(k)}(.)`` at the anchor of ``path`` (time 0)."""
    start = -(k + 1)
    H_end = family.at(path[0], n).set
    mu_end = H_end.measure()
    zero = mu_end * 0
    if mu_end == 0:
        return [zero] * (k + 1)
    H0 = family.at(path[start], n).set
    one = zero + 1
    dens: list[Pieces] = [[(a, b, one) for a, b in H0]]
    for j in range(start + 1, 0):
        dens = [push_density(path[j - 1].map, p) for p in dens]
        dens = _split_step(dens, family.at(path[j], n).set)
        _guard(dens)
    dens = [push_density(path[-1].map, p) for p in dens]
    row = [integrate(p, H_end) / mu_end for p in dens]
    row += [zero] * (k + 1 - len(row))
    return row[: k + 1]


def _fixed_rows(path, family: TargetFamily, n: int, K: int) -> list[list[Number]]:
    """All lags in one forward pass (targets do not depend on time)."""
    fib = path[0]
    H = family.at(fib, n).set
    mu = H.measure()
    zero = mu * 0
    if mu == 0:
        return [[zero] * (k + 1) for k in range(K + 1)]
    dens: list[Pieces] = [[(a, b, zero + 1) for a, b in H]]
    rows = []
    for k in range(K + 1):
        dens = [push_density(fib.map, p) for p in dens]
        row = [integrate(p, H) / mu for p in dens]
        row += [zero] * (k + 1 - len(row))
        rows.append(row[: k + 1])
        if k < K:
            dens = _split_step(dens, H)
            _guard(dens)
    return rows


def beta_exact(
    d: DrivingSystem, f: TargetFamily, anchor=None, n: int = 1000, K: int = 10
) -> BetaTable:
    """Exact ``beta_{omega,n}^{(k)}(l)`` for ``k <= K`` at ``omega = anchor``.

    Arithmetic is exact whenever the maps, centers and scales are rational.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    path = d.path(anchor)
    if isinstance(d, Fixed):
        rows = _fixed_rows(path, f, n, K)
    else:
        rows = [_one_lag(path, f, n, k) for k in range(K + 1)]
    exact = all(isinstance(v, Fraction) for r in rows for v in r)
    return BetaTable(rows, n=n, exact=exact, meta={"anchor": str(path.anchor)})


def overlap_ratio(d: DrivingSystem, f: TargetFamily, anchor, n: int, k: int) -> Number:
    """``Leb(H_{sigma^{-(k+1)}} cap T^{-(k+1)} H) / Leb(H)`` by preimage arithmetic."""
    from .maps import compose_preimage

    path = d.path(anchor)
    H_end = f.at(path[0], n).set
    if H_end.measure() == 0:
        return 0
    maps = [path[j].map for j in range(-(k + 1), 0)]
    pre = compose_preimage(maps, H_end)
    return pre.intersect(f.at(path[-(k + 1)], n).set).measure() / H_end.measure()


def beta_limit(
    d: DrivingSystem,
    f: TargetFamily,
    anchor=None,
    K: int = 10,
    n_grid: Sequence[int] = (100, 1000, 10000),
    tol: float = 0.0,
) -> BetaTable:
    """``n -> infinity`` limits from exact tables on an increasing ``n`` grid.

    An entry is taken from the largest ``n`` when the last two grid values agree
    to within ``tol``; otherwise it is extrapolated linearly in ``1/n``. Lags
    beyond ``log_gamma(n)`` are not yet in the ``1/n`` regime, which leaves a
    bias of order ``1e-4`` in ``sigma`` on the default grid.
    """
    tables = [beta_exact(d, f, anchor, n, K) for n in n_grid]
    if len(tables) == 1:
        t = tables[0]
        return BetaTable([[float(v) for v in r] for r in t.rows], None, meta={"n_grid": list(n_grid)})
    n2, n3 = n_grid[-2], n_grid[-1]
    t2, t3 = tables[-2], tables[-1]
    rows, extrapolated = [], 0
    for k in range(K + 1):
        r2, r3 = t2.row(k), t3.row(k)
        r = r3.copy()
        bad = np.abs(r3 - r2) > tol
        if bad.any():
            extrapolated += int(bad.sum())
            r[bad] = (n3 * r3[bad] - n2 * r2[bad]) / (n3 - n2)
        rows.append(list(np.clip(r, 0.0, None)))
    return BetaTable(rows, None, meta={"n_grid": list(n_grid), "extrapolated": extrapolated})


# ---------------------------------------------------------------------------
# qhat <-> beta
# ---------------------------------------------------------------------------
def qhat_from_beta(b: BetaTable, s: float) -> np.ndarray:
    """``qhat^{(k)}(s) = (1 - e^{is}) sum_l e^{ils} beta^{(k)}(l)`` for every lag."""
    z = np.exp(1j * s)
    return np.array([(1 - z) * np.polyval(b.row(k)[::-1], z) for k in range(b.K + 1)])


def qhat_row(beta_row: Sequence[float], s: Sequence[float]) -> np.ndarray:
    """``qhat`` of a single lag at several ``s`` values."""
    s = np.asarray(s, dtype=float)
    z = np.exp(1j * s)
    ell = np.arange(len(beta_row))
    return (1 - z) * (np.exp(1j * np.outer(s, ell)) @ np.asarray(beta_row, dtype=float))


def extraction_matrix(k: int, s: Sequence[float] | None = None) -> np.ndarray:
    """``D_k M_k`` with ``D = diag(1 - e^{i s_j})`` and ``M[j, l] = e^{i s_j l}``."""
    s = np.arange(1, k + 2, dtype=float) if s is None else np.asarray(s, dtype=float)
    ell = np.arange(k + 1)
    return (1 - np.exp(1j * s))[:, None] * np.exp(1j * np.outer(s, ell))


@dataclass
class Extraction:
    beta: np.ndarray
    cond: float
    max_imag: float
    least_squares: bool


def beta_from_qhat(
    q: Sequence[complex], k: int | None = None, s: Sequence[float] | None = None,
    least_squares: bool = False, max_cond: float = 1e12,
) -> Extraction:
    """Recover ``beta^{(k)}`` from ``qhat^{(k)}`` sampled at ``s``.

    By default ``s = 1, ..., k+1`` and the square system is solved directly; this
    is capped at ``k <= 10``. With ``least_squares`` a longer ``s`` grid may be
    supplied and the overdetermined system is solved in the least-squares sense.
    """
    q = np.asarray(q, dtype=complex)
    if k is None:
        k = len(q) - 1
    if s is None:
        s = np.arange(1, k + 2, dtype=float)
    s = np.asarray(s, dtype=float)
    if len(s) != len(q):
        raise ValueError("need one qhat value per s point")
    if not least_squares:
        if k > 10:
            raise ValueError("square extraction is capped at k <= 10; pass least_squares=True")
        if len(q) != k + 1:
            raise ValueError("square extraction needs exactly k+1 values")
    A = extraction_matrix(k, s)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_cond:
        raise np.linalg.LinAlgError(f"extraction system ill-conditioned (cond={cond:.3e})")
    if least_squares:
        beta = np.linalg.lstsq(A, q, rcond=None)[0]
    else:
        beta = np.linalg.solve(A, q)
    imag = float(np.max(np.abs(beta.imag))) if beta.size else 0.0
    if imag > 1e-8:
        warnings.warn(f"discarding imaginary parts up to {imag:.2e}", RuntimeWarning, stacklevel=2)
    return Extraction(beta.real.copy(), cond, imag, least_squares)


# ---------------------------------------------------------------------------
# theta functions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ThetaFunction:
    """``theta(s) = 1 - (1 - e^{is}) B(e^{is})``.

    ``B(z) = sum_l b_l z^l`` is the cluster generating function; ``theta0 = 1 - B(0)``
    and ``sigma = B(1)`` are stored alongside.
    """

    cluster: Callable[[np.ndarray], np.ndarray]
    theta0: float
    sigma: float
    tag: str
    tail: float = 0.0
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        z = np.exp(1j * s)
        return 1 - (1 - z) * self.cluster(z)

    def bound(self, s) -> np.ndarray:
        return 1 + self.sigma * np.abs(1 - np.exp(1j * np.asarray(s, dtype=float)))


def truncation_lag(gamma_min: float, tol: float = SERIES_TOL, cap: int = MAX_LAG) -> int:
    """Smallest ``K`` with ``gamma^{-(K+1)} / (1 - 1/gamma) < tol``, capped."""
    g = float(gamma_min)
    if g <= 1:
        raise ValueError("gamma_min must exceed 1")
    for K in range(cap + 1):
        if g ** -(K + 1) / (1 - 1 / g) < tol:
            return K
    return cap


def series_tail(gamma_min: float, K: int, h: int = 1) -> float:
    """Bound on ``sum_{k > K} sum_l beta^{(k)}(l)`` for the full-branch class."""
    g = float(gamma_min)
    return h * g ** -(K + 2) / (1 - 1 / g)


def _poly(b: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    coeffs = np.asarray(b, dtype=float)

    def B(z):
        return np.polynomial.polynomial.polyval(z, coeffs)

    return B


def theta_series(b: BetaTable, gamma_min: float = 2.0, h: int = 1) -> ThetaFunction:
    coeffs = b.cluster_coefficients()
    tag = "exact-series" if b.n is None else "finite-n"
    return ThetaFunction(
        _poly(coeffs),
        theta0=1.0 - float(coeffs[0]) if len(coeffs) else 1.0,
        sigma=float(coeffs.sum()),
        tag=tag,
        tail=series_tail(gamma_min, b.K, h),
        params={"n": b.n, "K": b.K},
    )


def _geometric(weight: float, ratio: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: weight / (1 - ratio * z)


def overlap_periodic_case(p1, p2, alpha, gamma1, gamma2, a_max: int = 10**6) -> tuple[int, int]:
    """Case number and threshold index ``a_{1,2}`` or ``a_{2,1}``.

    Case 1: both minima are attained by the geometric branch at ``a = 1``.
    Case 2: ``a_{1,2} > 1``; case 3: ``a_{2,1} > 1``. Both at once is impossible.
    """
    long12 = p1 <= p2 * alpha * gamma2
    long21 = p2 <= p1 * gamma1
    if long12 and long21:
        raise ValueError(
            "parameters put both cross transitions in the saturated regime, "
            "which is inconsistent (p1 <= p2*alpha*gamma2 and p2 <= p1*gamma1)"
        )
    if long12:
        a = 1
        while p1 <= p2 * alpha**a * gamma2 and a < a_max:
            a += 1
        return 2, a
    if long21:
        a = 1
        while p2 <= p1 * alpha ** (a - 1) * gamma1 and a < a_max:
            a += 1
        return 3, a
    return 1, 1


def theta_closed_form(tag: str, **p) -> ThetaFunction:
    """Closed-form ``theta`` for the supported scenario families.

    ``aperiodic``; ``periodic(alpha)``; ``multi-independent(p, alpha)`` where
    ``alpha[j] = 0`` marks an aperiodic component; ``overlap-aperiodic(p1, p2,
    alpha)``; ``overlap-periodic(p1, p2, alpha, gamma1, gamma2)`` with the case
    picked automatically; ``random-product(gammas)`` with ``gammas[m]`` the
    central slope ``m + 1`` steps back; ``iid-zeta(p, gamma)``.
    """
    if tag == "aperiodic":
        return ThetaFunction(lambda z: np.zeros_like(z), 1.0, 0.0, tag)
    if tag in ("periodic", "const-gamma"):
        a = float(p["alpha"])
        return ThetaFunction(_geometric(a, a), 1 - a, a / (1 - a), "periodic", params={"alpha": a})
    if tag == "multi-independent":
        w = np.asarray(p["p"], dtype=float)
        al = np.asarray(p["alpha"], dtype=float)

        def B(z):
            z = np.asarray(z)
            return sum(wj * aj / (1 - aj * z) for wj, aj in zip(w, al)) + 0 * z

        return ThetaFunction(
            B, 1 - float(w @ al), float(np.sum(w * al / (1 - al))), tag,
            params={"p": w.tolist(), "alpha": al.tolist()},
        )
    if tag == "overlap-aperiodic":
        G = min(float(p["p1"]), float(p["p2"]) * float(p["alpha"]))
        return ThetaFunction(lambda z: G + 0 * np.asarray(z), 1 - G, G, tag, params={"Gamma": G})
    if tag.startswith("overlap-periodic"):
        p1, p2 = float(p["p1"]), float(p["p2"])
        a, g1, g2 = float(p["alpha"]), float(p["gamma1"]), float(p["gamma2"])
        case, thr = overlap_periodic_case(p1, p2, a, g1, g2)
        if case == 1:
            A = p1 * g1 + a * (p2 * g2 + 1)
            B = _geometric(A, a)
        elif case == 2:
            def B(z, thr=thr):
                z = np.asarray(z, dtype=complex)
                head = p1 * sum(z**m for m in range(thr - 1))
                return head + p2 * g2 * a * (z * a) ** (thr - 1) / (1 - a * z) + (a + p1 * g1) / (1 - a * z)
        else:
            def B(z, thr=thr):
                z = np.asarray(z, dtype=complex)
                head = p2 * sum(z**m for m in range(thr - 1))
                return head + p1 * g1 * a * (z * a) ** (thr - 1) / (1 - a * z) + a * (1 + p2 * g2) / (1 - a * z)
        b0, b1 = complex(B(np.array(0.0))), complex(B(np.array(1.0)))
        return ThetaFunction(
            B, 1 - b0.real, b1.real, f"overlap-periodic-case{case}",
            params={"case": case, "threshold": thr},
        )
    if tag == "random-product":
        g = np.asarray(p["gammas"], dtype=float)
        coeffs = np.cumprod(1.0 / g)
        gmin = float(np.min(g))
        return ThetaFunction(
            _poly(coeffs), 1 - float(coeffs[0]), float(coeffs.sum()), tag,
            tail=series_tail(gmin, len(g) - 1),
        )
    if tag == "iid-zeta":
        zeta = float(np.dot(np.asarray(p["p"], float), 1.0 / np.asarray(p["gamma"], float)))
        return ThetaFunction(
            _geometric(zeta, zeta), 1 - zeta, zeta / (1 - zeta), tag, params={"zeta": zeta}
        )
    raise ValueError(f"unknown closed-form tag {tag!r}")


# ---------------------------------------------------------------------------
# Omega integration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ThetaMixture:
    """Weighted fibers ``(w_i, t_i, theta_i)`` standing in for the ``m``-integral."""

    entries: tuple[tuple[float, float, ThetaFunction], ...]

    def Theta(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=complex)
        for w, t, th in self.entries:
            if w * t:
                out = out + w * t * th(s)
        return out

    @property
    def tbar(self) -> float:
        return float(sum(w * t for w, t, _ in self.entries))

    @property
    def vartheta(self) -> float:
        return float(sum(w * t * th.theta0 for w, t, th in self.entries))

    @property
    def sigma_bar(self) -> float:
        return float(sum(w * t * (1 + 2 * th.sigma) for w, t, th in self.entries))


ThetaRule = Callable[[DrivingSystem, object, Fiber], ThetaFunction]


def mixture(
    d: DrivingSystem, f: TargetFamily, rule: ThetaRule, M: int = 1000, seed: int = 0
) -> ThetaMixture:
    """Evaluate ``rule`` on ``sample_fibers`` and pair each result with ``t_omega``."""
    entries = []
    for anchor, w in d.sample_fibers(M, seed):
        fib = d.fiber_at(anchor, 0)
        entries.append((float(w), float(f.t_of(fib)), rule(d, anchor, fib)))
    return ThetaMixture(tuple(entries))


def theta_integral(
    d: DrivingSystem, f: TargetFamily, rule: ThetaRule, s_grid, M: int = 1000, seed: int = 0
) -> np.ndarray:
    """``Theta(s) = int t_omega theta_omega(s) dm`` on ``s_grid``."""
    return mixture(d, f, rule, M, seed).Theta(s_grid)


def iid_zeta_mixture(d: IIDShift, f: TargetFamily) -> ThetaMixture:
    """Closed-form ``Theta`` for an i.i.d. base whose scale is independent of the slopes.

    Each fiber's ``theta`` is the random product series; averaging over the
    independent backward slopes gives a geometric law with ratio
    ``zeta = E[1 / gamma]``. The symbol table must factor as map x scale.
    """
    gam = [float(T.derivative(0.5 if not T.exact else Fraction(1, 2))) for T in d.maps]
    probs = np.asarray(d.probs, dtype=float)
    zeta = float(probs @ (1.0 / np.asarray(gam)))
    tbar = float(sum(p * float(t) for p, t in zip(probs, d.ts)))
    th = ThetaFunction(_geometric(zeta, zeta), 1 - zeta, zeta / (1 - zeta), "iid-zeta",
                       params={"zeta": zeta})
    return ThetaMixture(((1.0, tbar, th),))


def scaling_variation(d: DrivingSystem, f: TargetFamily, M: int = 1000, seed: int = 0) -> tuple[float, float]:
    """``(esssup t_w / t_{sigma^{-1} w}, essinf |T_w'(1/2)|)`` over sampled fibers."""
    ratios, slopes = [], []
    if isinstance(d, IIDShift):
        ts = [float(t) for t, p in zip(d.ts, d.probs) if p > 0]
        ratios = [a / b for a in ts for b in ts]
        slopes = [float(T.derivative(0.5)) for T, p in zip(d.maps, d.probs) if p > 0]
    else:
        for anchor, _ in d.sample_fibers(M, seed):
            now, prev = d.fiber_at(anchor, 0), d.fiber_at(anchor, -1)
            ratios.append(float(f.t_of(now)) / float(f.t_of(prev)))
            slopes.append(abs(float(now.map.derivative(0.5))))
    return max(ratios), min(slopes)


def check_scaling_guard(d: DrivingSystem, f: TargetFamily, M: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Enforce ``esssup t_w / t_{sigma^{-1} w} < essinf |T_w'(x0)|``.

    The lower bound ``1 <= esssup`` is always true for a stationary positive
    scale and is therefore checked non-strictly.
    """
    hi, lo = scaling_variation(d, f, M, seed)
    if not (1 - 1e-12 <= hi < lo):
        raise ValueError(
            f"scaling variation guard fails: esssup ratio {hi:.6g} vs essinf slope {lo:.6g}"
        )
    return hi, lo


def random_product_rule(K: int) -> ThetaRule:
    """``theta_omega`` from the central slopes along the backward orbit of ``omega``."""

    def rule(d: DrivingSystem, anchor, fib: Fiber) -> ThetaFunction:
        gammas = [abs(float(d.fiber_at(anchor, -m).map.derivative(0.5))) for m in range(1, K + 2)]
        return theta_closed_form("random-product", gammas=gammas)

    return rule


def constant_rule(theta: ThetaFunction) -> ThetaRule:
    return lambda d, anchor, fib: theta


def series_rule(
    f: TargetFamily, K: int, n_grid: Sequence[int] = (100, 1000, 10000)
) -> ThetaRule:
    """``theta_omega`` from extrapolated exact cluster tables at each fiber."""

    def rule(d: DrivingSystem, anchor, fib: Fiber) -> ThetaFunction:
        b = beta_limit(d, f, anchor, K, n_grid)
        return theta_series(b, float(fib.map.gamma_min), f.h_bound)

    return rule


def theta0_from_table(b: BetaTable) -> float:
    """``1 - sum_k beta^{(k)}(0)``."""
    return 1.0 - float(sum(float(r[0]) for r in b.rows))


__all__ = [
    "BetaTable", "ThetaFunction", "ThetaMixture", "NumericalGuardError", "Extraction",
    "beta_exact", "beta_limit", "qhat_from_beta", "qhat_row", "beta_from_qhat",
    "theta_series", "theta_closed_form", "theta_integral", "mixture", "iid_zeta_mixture",
    "truncation_lag", "series_tail", "check_scaling_guard", "random_product_rule",
    "constant_rule", "series_rule", "overlap_ratio", "push_density", "restrict", "integrate",
    "theta0_from_table",
]
