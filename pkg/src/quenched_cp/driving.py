"""Invertible ergodic driving systems and fiber bookkeeping.

A driving system turns an anchor fiber and an integer time ``j`` into the
fiber state at ``sigma^j(anchor)``, the map ``T`` assigned to that state and
the Kac scale ``t``. Three bases are supported: a fixed point (deterministic
dynamics), an irrational rotation of the circle and a Bernoulli shift on a
finite alphabet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from .maps import Number, PiecewiseLinearMap

_COUNTER_MOD = 2**256


@dataclass(frozen=True)
class Fiber:
    """One fiber ``sigma^time(anchor)`` with its map and scale."""

    time: int
    state: Hashable
    map: PiecewiseLinearMap
    t: Number


class DrivingSystem:
    """Base class; subclasses define ``state_at``, ``map_for`` and ``t_for``."""

    kind = "abstract"

    def state_at(self, anchor, j: int):
        raise NotImplementedError

    def map_for(self, state) -> PiecewiseLinearMap:
        raise NotImplementedError

    def t_for(self, state) -> Number:
        raise NotImplementedError

    def default_anchor(self):
        raise NotImplementedError

    def fiber_at(self, anchor, j: int) -> Fiber:
        state = self.state_at(anchor, j)
        return Fiber(j, state, self.map_for(state), self.t_for(state))

    def path(self, anchor=None) -> "FiberPath":
        return FiberPath(self, self.default_anchor() if anchor is None else anchor)

    def sample_fibers(self, M: int, seed: int = 0) -> list[tuple[object, float]]:
        raise NotImplementedError

    def integrate_over_omega(self, f: Callable[[Fiber], complex], M: int = 1, seed: int = 0):
        """Weighted average of ``f`` at time 0 over ``sample_fibers(M, seed)``."""
        samples = self.sample_fibers(M, seed)
        return sum(w * f(self.fiber_at(a, 0)) for a, w in samples)

    def distinct_maps(self, M: int = 64, seed: int = 0) -> list[PiecewiseLinearMap]:
        seen: dict[PiecewiseLinearMap, None] = {}
        for a, _ in self.sample_fibers(M, seed):
            seen.setdefault(self.fiber_at(a, 0).map, None)
        return list(seen)


@dataclass(frozen=True, eq=False)
class Fixed(DrivingSystem):
    """Trivial base: the same map and scale at every time."""

    map: PiecewiseLinearMap
    t: Number = 1
    kind = "fixed"

    def state_at(self, anchor, j):
        return None

    def map_for(self, state):
        return self.map

    def t_for(self, state):
        return self.t

    def default_anchor(self):
        return None

    def sample_fibers(self, M=1, seed=0):
        return [(None, 1.0)]

    def distinct_maps(self, M=1, seed=0):
        return [self.map]


@dataclass(frozen=True, eq=False)
class Rotation(DrivingSystem):
    """Circle rotation ``omega -> omega + alpha (mod 1)``.

    ``map_rule`` and ``t_rule`` receive the fiber state as a Fraction in
    ``[0, 1)``; ``alpha`` is a rational approximant of an irrational number.
    """

    alpha: Fraction
    map_rule: Callable[[Fraction], PiecewiseLinearMap]
    t_rule: Callable[[Fraction], Number]
    omega0: Fraction = Fraction(0)
    kind = "rotation"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def state_at(self, anchor, j):
        base = self.omega0 if anchor is None else Fraction(anchor)
        return (base + j * Fraction(self.alpha)) % 1

    def map_for(self, state):
        hit = self._cache.get(state)
        if hit is None:
            if len(self._cache) > 4096:
                self._cache.clear()
            hit = self._cache[state] = self.map_rule(state)
        return hit

    def t_for(self, state):
        return self.t_rule(state)

    def default_anchor(self):
        return self.omega0

    def sample_fibers(self, M=1000, seed=0):
        """Birkhoff grid ``omega0 + k*alpha`` for ``k < M`` with weights ``1/M``."""
        return [(self.state_at(self.omega0, k), 1.0 / M) for k in range(M)]


def _philox_uniform(seed: int, j: int) -> float:
    raw = np.random.Philox(key=int(seed), counter=int(j) % _COUNTER_MOD).random_raw()
    return (int(raw) >> 11) * 2.0**-53


def _philox_uniform_block(seed: int, j0: int, m: int) -> np.ndarray:
    """Same values as ``_philox_uniform(seed, j)`` for ``j0 <= j < j0 + m``."""
    raw = np.random.Philox(key=int(seed), counter=int(j0) % _COUNTER_MOD).random_raw(4 * m)[::4]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True, eq=False)
class IIDShift(DrivingSystem):
    """Bernoulli shift on ``len(probs)`` symbols.

    The anchor is a 64-bit stream key; the symbol at time ``j`` is a pure
    function of ``(key, j)`` so negative times need no stored history.
    ``maps[i]`` and ``ts[i]`` are attached to symbol ``i``.
    """

    probs: tuple[float, ...]
    maps: tuple[PiecewiseLinearMap, ...]
    ts: tuple[Number, ...]
    seed: int = 0
    kind = "iid"

    def __post_init__(self):
        if len(self.probs) != len(self.maps) or len(self.probs) != len(self.ts):
            raise ValueError("probs, maps and ts must have equal length")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1) > 1e-12:
            raise ValueError("symbol probabilities must be nonnegative and sum to 1")

    @property
    def cumulative(self) -> np.ndarray:
        c = np.cumsum(np.asarray(self.probs, dtype=float))
        c[-1] = 1.0
        return c

    def symbol(self, key: int, j: int) -> int:
        return int(np.searchsorted(self.cumulative, _philox_uniform(key, j), side="right"))

    def symbols(self, key: int, j0: int, m: int) -> np.ndarray:
        u = _philox_uniform_block(key, j0, m)
        return np.searchsorted(self.cumulative, u, side="right")

    def state_at(self, anchor, j):
        return self.symbol(self.seed if anchor is None else anchor, j)

    def map_for(self, state):
        return self.maps[state]

    def t_for(self, state):
        return self.ts[state]

    def default_anchor(self):
        return self.seed

    def sample_fibers(self, M=1000, seed=0):
        keys = np.random.SeedSequence(seed).generate_state(M, dtype=np.uint64)
        return [(int(k), 1.0 / M) for k in keys]

    def distinct_maps(self, M=1, seed=0):
        return list(dict.fromkeys(self.maps))


class FiberPath:
    """Lazy cache of fibers along the orbit of one anchor.

    Window extensions only add entries, so returned fibers never change.
    """

    def __init__(self, driving: DrivingSystem, anchor):
        self.driving = driving
        self.anchor = anchor
        self._fibers: dict[int, Fiber] = {}

    def __getitem__(self, j: int) -> Fiber:
        fib = self._fibers.get(j)
        if fib is None:
            fib = self._fibers[j] = self.driving.fiber_at(self.anchor, j)
        return fib

    def window(self, lo: int, hi: int) -> list[Fiber]:
        """Fibers for times ``lo <= j < hi``."""
        if isinstance(self.driving, IIDShift) and hi - lo > 64:
            syms = self.driving.symbols(self.anchor, lo, hi - lo)
            for j, s in zip(range(lo, hi), syms):
                if j not in self._fibers:
                    s = int(s)
                    self._fibers[j] = Fiber(j, s, self.driving.maps[s], self.driving.ts[s])
        return [self[j] for j in range(lo, hi)]


def fiber_at(d: DrivingSystem, anchor, j: int) -> Fiber:
    return d.fiber_at(anchor, j)


def sample_fibers(d: DrivingSystem, M: int, seed: int = 0):
    if M < 1:
        raise ValueError("M must be positive")
    return d.sample_fibers(M, seed)


def integrate_over_omega(d: DrivingSystem, f: Callable[[Fiber], complex], M: int = 1, seed: int = 0):
    return d.integrate_over_omega(f, M, seed)


def rational_approximant(x: str | float, min_denominator: int = 10**12) -> Fraction:
    """Decimal-string rational with denominator at least ``min_denominator``."""
    q = Fraction(x) if isinstance(x, str) else Fraction(repr(float(x)))
    if q.denominator < min_denominator:
        raise ValueError(f"approximant {q} has denominator below {min_denominator}")
    return q


SQRT2_MINUS_1 = Fraction("0.41421356237309504880168872420969807857")


def gamma_sequence(d: DrivingSystem, path: FiberPath, times: Sequence[int]) -> list[Number]:
    """Central slopes ``|T'(1/2)|`` at the given times along ``path``."""
    return [path[j].map.derivative(Fraction(1, 2) if path[j].map.exact else 0.5) for j in times]

