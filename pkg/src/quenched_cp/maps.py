"""Piecewise-linear expanding maps of the unit interval and exact interval sets.

Every map here is a finite ordered list of affine branches on half-open
domains ``[a_i, a_{i+1})`` that partition ``[0, 1)``. Two arithmetic backends
share one code path: :class:`fractions.Fraction` for exact bookkeeping and
``float`` for throughput. A map is exact iff all of its data are Fractions.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

Number = Union[Fraction, float, int]

FLOAT_TOL = 1e-12


def as_number(value, exact: bool = True) -> Number:
    """Parse ``value`` (int, float, Fraction or a string such as ``"1/3"``)."""
    if isinstance(value, str):
        value = Fraction(value.strip())
    if exact:
        return Fraction(value)
    return float(value)


class IntervalSet:
    """A finite disjoint union of half-open intervals ``[a, b)`` inside ``[0, 1)``.

    The constructor sorts, drops empty pieces and merges pieces that overlap or
    touch, so two sets describing the same subset compare equal.
    """

    __slots__ = ("_iv",)

    def __init__(self, intervals: Iterable[tuple[Number, Number]] = ()):
        pieces = sorted((a, b) for a, b in intervals if b > a)
        merged: list[tuple[Number, Number]] = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self._iv = tuple(merged)

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def unit(cls, exact: bool = True) -> "IntervalSet":
        one = Fraction(1) if exact else 1.0
        return cls([(one * 0, one)])

    @property
    def intervals(self) -> tuple[tuple[Number, Number], ...]:
        return self._iv

    def __iter__(self) -> Iterator[tuple[Number, Number]]:
        return iter(self._iv)

    def __len__(self) -> int:
        return len(self._iv)

    def __bool__(self) -> bool:
        return bool(self._iv)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self._iv == other._iv

    def __hash__(self) -> int:
        return hash(self._iv)

    def __repr__(self) -> str:
        body = ", ".join(f"[{a}, {b})" for a, b in self._iv)
        return f"IntervalSet({body})"

    def measure(self) -> Number:
        return sum((b - a for a, b in self._iv), 0)

    def contains(self, x: Number) -> bool:
        i = bisect.bisect_right(self._iv, (x, float("inf"))) - 1
        return i >= 0 and self._iv[i][0] <= x < self._iv[i][1]

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        A, B = self._iv, other._iv
        while i < len(A) and j < len(B):
            lo = max(A[i][0], B[j][0])
            hi = min(A[i][1], B[j][1])
            if hi > lo:
                out.append((lo, hi))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self._iv + other._iv)

    def complement(self, lo: Number = 0, hi: Number = 1) -> "IntervalSet":
        out, cur = [], lo
        for a, b in self._iv:
            if a > cur:
                out.append((cur, min(a, hi)))
            cur = max(cur, b)
        if cur < hi:
            out.append((cur, hi))
        return IntervalSet(out)

    def is_disjoint(self, other: "IntervalSet") -> bool:
        return not self.intersect(other)

    def covers_unit(self) -> bool:
        return len(self._iv) == 1 and self._iv[0][0] <= 0 and self._iv[0][1] >= 1

    def to_float(self) -> "IntervalSet":
        return IntervalSet((float(a), float(b)) for a, b in self._iv)


@dataclass(frozen=True)
class Branch:
    """Affine piece ``x -> slope * x + intercept`` on ``[lo, hi)``."""

    lo: Number
    hi: Number
    slope: Number
    intercept: Number

    def __call__(self, x: Number) -> Number:
        return self.slope * x + self.intercept

    def image(self) -> tuple[Number, Number]:
        y0, y1 = self(self.lo), self(self.hi)
        return (y0, y1) if y0 <= y1 else (y1, y0)

    def inverse(self, y: Number) -> Number:
        return (y - self.intercept) / self.slope


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Expanding piecewise-linear map of ``[0, 1)``.

    ``circle=True`` marks a mod-1 map unrolled onto the interval: its first and
    last pieces are two halves of one circle branch, so their images are
    complementary arcs rather than all of ``[0, 1]``.
    """

    branches: tuple[Branch, ...]
    circle: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        self._validate()

    # -- validation ---------------------------------------------------------
    def _close(self, a: Number, b: Number) -> bool:
        if self.exact:
            return a == b
        return abs(float(a) - float(b)) <= FLOAT_TOL

    def _validate(self) -> None:
        br = self.branches
        if not br:
            raise ValueError("map needs at least one branch")
        if not self._close(br[0].lo, 0) or not self._close(br[-1].hi, 1):
            raise ValueError("branch domains must start at 0 and end at 1")
        for left, right in zip(br, br[1:]):
            if not self._close(left.hi, right.lo):
                raise ValueError("branch domains must be contiguous")
        for b in br:
            if not b.hi > b.lo:
                raise ValueError("breakpoints must be strictly increasing")
            if not abs(b.slope) > 1:
                raise ValueError(f"branch slope {b.slope} is not expanding")
            y0, y1 = b.image()
            if y0 < 0 and not self._close(y0, 0) or y1 > 1 and not self._close(y1, 1):
                raise ValueError("branch image leaves [0, 1]")
        if not self.circle:
            for b in br:
                y0, y1 = b.image()
                if not (self._close(y0, 0) and self._close(y1, 1)):
                    raise ValueError("non-circle maps need full branches")
        if not self.preserves_lebesgue():
            raise ValueError("map does not preserve Lebesgue measure")

    # -- basic data ---------------------------------------------------------
    @cached_property
    def exact(self) -> bool:
        return all(
            isinstance(v, (Fraction, int)) and not isinstance(v, bool)
            for b in self.branches
            for v in (b.lo, b.hi, b.slope, b.intercept)
        )

    @cached_property
    def breakpoints(self) -> tuple[Number, ...]:
        return tuple(b.lo for b in self.branches) + (self.branches[-1].hi,)

    @property
    def slopes(self) -> tuple[Number, ...]:
        return tuple(b.slope for b in self.branches)

    @property
    def gamma_min(self) -> Number:
        return min(abs(s) for s in self.slopes)

    @property
    def gamma_max(self) -> Number:
        return max(abs(s) for s in self.slopes)

    def branch_count(self) -> int:
        """``d(T)``: the maximal number of preimages of a point."""
        if self.circle:
            return len(self.branches) - 1
        return len(self.branches)

    def inverse_slope_sum(self) -> Number:
        """Sum of ``1/|slope|`` over full branches (circle wrap pairs count once)."""
        inv = [1 / abs(s) if self.exact else 1.0 / abs(float(s)) for s in self.slopes]
        if self.circle and len(inv) > 1:
            return sum(inv[1:-1], inv[0])
        return sum(inv[1:], inv[0])

    def preserves_lebesgue(self) -> bool:
        """Check ``sum_{T(x)=y} 1/|T'(x)| == 1`` for every ``y`` in ``[0, 1)``."""
        cuts = sorted({0, 1, *(v for b in self.branches for v in b.image())})
        if not self.exact:
            # rounded image endpoints leave sliver cells between equal cuts
            merged = [cuts[0]]
            for c in cuts[1:]:
                if c - merged[-1] > FLOAT_TOL:
                    merged.append(c)
            cuts = merged
        for y0, y1 in zip(cuts, cuts[1:]):
            if not y1 > y0:
                continue
            mid = (y0 + y1) / 2
            total = 0
            for b in self.branches:
                lo, hi = b.image()
                if lo <= mid < hi:
                    total += 1 / abs(b.slope)
            if not self._close(total, 1):
                return False
        return True

    # -- evaluation ---------------------------------------------------------
    def branch_index(self, x: Number) -> int:
        i = bisect.bisect_right(self.breakpoints, x) - 1
        return min(max(i, 0), len(self.branches) - 1)

    def __call__(self, x: Number) -> Number:
        return eval_map(self, x)

    def derivative(self, x: Number) -> Number:
        return self.branches[self.branch_index(x)].slope

    def to_float(self) -> "PiecewiseLinearMap":
        if not self.exact:
            return self
        fb = tuple(
            Branch(float(b.lo), float(b.hi), float(b.slope), float(b.intercept))
            for b in self.branches
        )
        return PiecewiseLinearMap(fb, circle=self.circle, name=self.name)

    @cached_property
    def _tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        bp = np.array([float(v) for v in self.breakpoints])
        sl = np.array([float(b.slope) for b in self.branches])
        ic = np.array([float(b.intercept) for b in self.branches])
        return bp, sl, ic

    def tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Float arrays ``(breakpoints, slopes, intercepts)`` for vectorised code."""
        return self._tables

    def eval_array(self, x: np.ndarray) -> np.ndarray:
        bp, sl, ic = self.tables()
        idx = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, len(sl) - 1)
        return sl[idx] * x + ic[idx]

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "circle": self.circle,
            "breakpoints": [str(v) for v in self.breakpoints],
            "slopes": [str(s) for s in self.slopes],
            "intercepts": [str(b.intercept) for b in self.branches],
        }

    @classmethod
    def from_dict(cls, data: dict, exact: bool = True) -> "PiecewiseLinearMap":
        bp = [as_number(v, exact) for v in data["breakpoints"]]
        sl = [as_number(v, exact) for v in data["slopes"]]
        ic = [as_number(v, exact) for v in data["intercepts"]]
        if not (len(bp) == len(sl) + 1 == len(ic) + 1):
            raise ValueError("breakpoints must have one more entry than slopes/intercepts")
        branches = tuple(Branch(bp[i], bp[i + 1], sl[i], ic[i]) for i in range(len(sl)))
        return cls(branches, circle=bool(data.get("circle", False)), name=data.get("name", ""))


def eval_map(T: PiecewiseLinearMap, x: Number) -> Number:
    """Evaluate ``T`` at ``x``; a breakpoint belongs to the branch on its right."""
    return T.branches[T.branch_index(x)](x)


def preimage(T: PiecewiseLinearMap, S: IntervalSet) -> IntervalSet:
    """Exact ``T^{-1}(S)``."""
    out = []
    for b in T.branches:
        ylo, yhi = b.image()
        for c, d in S:
            lo, hi = max(c, ylo), min(d, yhi)
            if hi <= lo:
                continue
            x0, x1 = b.inverse(lo), b.inverse(hi)
            out.append((x0, x1) if x0 <= x1 else (x1, x0))
    return IntervalSet(out)


def image(T: PiecewiseLinearMap, S: IntervalSet) -> IntervalSet:
    """Exact forward image ``T(S)``."""
    out = []
    for b in T.branches:
        for c, d in S:
            lo, hi = max(c, b.lo), min(d, b.hi)
            if hi <= lo:
                continue
            y0, y1 = b(lo), b(hi)
            out.append((y0, y1) if y0 <= y1 else (y1, y0))
    return IntervalSet(out)


def build_central_branch_map(
    gamma: Number, left_branches: int = 1, right_branches: int = 1, exact: bool = True
) -> PiecewiseLinearMap:
    """Map with a central branch of slope ``gamma`` through the fixed point 1/2.

    The outer regions ``[0, a)`` and ``[1 - a, 1)`` with ``a = (1 - 1/gamma)/2``
    are cut into equal-width increasing full branches.
    """
    g = as_number(gamma, exact)
    if not g > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    half = Fraction(1, 2) if exact else 0.5
    a = (1 - 1 / g) * half
    b = 1 - a
    if left_branches < 1 or right_branches < 1:
        raise ValueError("outer regions are nonempty and need at least one branch each")
    branches = []
    w = a / left_branches
    for i in range(left_branches):
        lo = i * w
        branches.append(Branch(lo, lo + w if i < left_branches - 1 else a, 1 / w, -lo / w))
    branches.append(Branch(a, b, g, -(g - 1) * half))
    w = a / right_branches
    for i in range(right_branches):
        lo = b + i * w
        hi = lo + w if i < right_branches - 1 else (1 if exact else 1.0)
        branches.append(Branch(lo, hi, 1 / w, -lo / w))
    return PiecewiseLinearMap(tuple(branches), name=f"central(gamma={gamma})")


def build_beta_map(beta: int, r: Number = 0, exact: bool = True) -> PiecewiseLinearMap:
    """``x -> beta * x + r (mod 1)`` unrolled into affine pieces."""
    if int(beta) != beta or beta < 2:
        raise ValueError(f"beta must be an integer >= 2, got {beta}")
    beta = int(beta)
    rr = as_number(r, exact)
    if not 0 <= rr < 1:
        raise ValueError("r must lie in [0, 1)")
    B = Fraction(beta) if exact else float(beta)
    cuts = [(m - rr) / B for m in range(1, beta + 1)]
    cuts = [c for c in cuts if 0 < c < 1]
    edges = [rr * 0] + cuts + [rr * 0 + 1]
    branches = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        branches.append(Branch(lo, hi, B, rr - i))
    return PiecewiseLinearMap(tuple(branches), circle=rr != 0, name=f"beta({beta},{r})")


def tripling_map(exact: bool = True) -> PiecewiseLinearMap:
    return build_beta_map(3, 0, exact)


def compose_preimage(maps: Sequence[PiecewiseLinearMap], S: IntervalSet) -> IntervalSet:
    """``(T_{k-1} o ... o T_0)^{-1}(S)`` for ``maps = [T_0, ..., T_{k-1}]``."""
    for T in reversed(maps):
        S = preimage(T, S)
    return S
