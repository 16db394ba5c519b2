"""Shrinking target families with Kac scaling ``Leb(H_n) = t / n``."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .driving import Fiber, FiberPath
from .maps import IntervalSet, Number

CenterRule = Union[Number, Sequence[Number], Callable[[Fiber], Number]]


@dataclass(frozen=True)
class Component:
    """One interval component.

    ``center`` is a number, a per-symbol table (indexed by an integer fiber
    state) or a callable of the fiber; ``weight`` is the share ``p_j`` of the
    total target measure.
    """

    center: CenterRule
    weight: Number = 1

    def center_at(self, fiber: Fiber) -> Number:
        c = self.center
        if callable(c):
            return c(fiber)
        if isinstance(c, (tuple, list)):
            return c[fiber.state]
        return c


class Target(NamedTuple):
    set: IntervalSet
    t: Number
    xi: Number


@dataclass(frozen=True)
class TargetFamily:
    components: tuple[Component, ...]
    scale: Callable[[Fiber], Number] | None = None
    snap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        total = sum(c.weight for c in self.components)
        if self.components and abs(float(total) - 1) > 1e-12:
            raise ValueError(f"component weights sum to {total}, expected 1")

    @property
    def h_bound(self) -> int:
        """Uniform bound on the number of connected components."""
        return len(self.components)

    def t_of(self, fiber: Fiber) -> Number:
        return fiber.t if self.scale is None else self.scale(fiber)

    def _snap(self, x: Number) -> Number:
        if self.snap is None:
            return x
        N = self.snap
        if isinstance(x, Fraction):
            return Fraction(round(x * N), N)
        return round(x * N) / N

    def at(self, fiber: Fiber, n: int) -> Target:
        if n < 1:
            raise ValueError("n must be a positive integer")
        t = self.t_of(fiber)
        if t < 0:
            raise ValueError("scale t must be nonnegative")
        if t / n >= 1:
            raise ValueError(f"target is not small: t/n = {t / n} >= 1")
        pieces = []
        for comp in self.components:
            if comp.weight == 0 or t == 0:
                continue
            c = comp.center_at(fiber)
            half = comp.weight * t / (2 * n)
            lo, hi = self._snap(c - half), self._snap(c + half)
            lo, hi = max(lo, 0 * lo), min(hi, 0 * hi + 1)
            pieces.append((lo, hi))
        S = IntervalSet(pieces)
        return Target(S, t, n * S.measure() - t)


def target_at(f: TargetFamily, fiber: Fiber, n: int) -> Target:
    return f.at(fiber, n)


def target_arrays(
    f: TargetFamily, path: FiberPath, n: int, times: range
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Float arrays ``(lo, hi, count)`` of shape ``(len(times), h)`` for kernels."""
    h = max(f.h_bound, 1)
    lo = np.zeros((len(times), h))
    hi = np.zeros((len(times), h))
    cnt = np.zeros(len(times), dtype=np.int64)
    for r, j in enumerate(times):
        S = f.at(path[j], n).set
        cnt[r] = len(S)
        for c, (a, b) in enumerate(S):
            lo[r, c], hi[r, c] = float(a), float(b)
    return lo, hi, cnt


def indicator_hits(
    f: TargetFamily, path: FiberPath, n: int, orbit: Sequence[Number], k: int
) -> tuple[list[int], int]:
    """Hit pattern ``1_{H_{sigma^j omega, n}}(orbit[j])`` for ``j < k`` and its sum."""
    if len(orbit) < k:
        raise ValueError("orbit shorter than horizon")
    bits = [int(f.at(path[j], n).set.contains(orbit[j])) for j in range(k)]
    return bits, sum(bits)


def nesting_holds(f: TargetFamily, fiber: Fiber, n: int, n2: int) -> bool:
    """``H_{n2}`` is contained in ``H_n`` for ``n2 >= n``."""
    small, big = f.at(fiber, n2).set, f.at(fiber, n).set
    return small.intersect(big) == small


def disjoint_threshold(f: TargetFamily, fiber: Fiber, n_max: int = 10**9) -> int:
    """Smallest ``n`` from which the components are disjoint and inside ``[0, 1)``."""
    t = f.t_of(fiber)
    if t == 0 or not f.components:
        return 1
    centers = sorted((c.center_at(fiber), c.weight) for c in f.components)
    need = 0.0
    for c, p in centers:
        need = max(need, float(p * t) / (2 * float(min(c, 1 - c))) if 0 < c < 1 else float("inf"))
    for (c1, p1), (c2, p2) in zip(centers, centers[1:]):
        gap = float(c2 - c1)
        need = max(need, float((p1 + p2) * t) / (2 * gap) if gap > 0 else float("inf"))
    n = int(np.floor(need)) + 1
    return min(max(n, int(np.floor(float(t))) + 1), n_max)
