from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quenched_cp.maps import (
    Branch,
    IntervalSet,
    PiecewiseLinearMap,
    build_beta_map,
    build_central_branch_map,
    compose_preimage,
    image,
    preimage,
    tripling_map,
)

gammas = st.fractions(min_value=Fraction(11, 10), max_value=8).filter(lambda g: g > 1)
beta_maps = st.builds(
    build_beta_map,
    st.integers(2, 7),
    st.fractions(min_value=0, max_value=Fraction(49, 50), max_denominator=50),
)
central_maps = st.builds(build_central_branch_map, gammas, st.integers(1, 3), st.integers(1, 3))
maps = st.one_of(beta_maps, central_maps)


@st.composite
def interval_sets(draw):
    pts = sorted(set(draw(st.lists(st.fractions(0, 1, max_denominator=64), min_size=2, max_size=8))))
    pairs = [(a, b) for a, b in zip(pts[::2], pts[1::2]) if b > a]
    return IntervalSet(pairs)


def test_interval_set_normalises_and_merges():
    S = IntervalSet([(Fraction(1, 2), Fraction(3, 4)), (Fraction(0), Fraction(1, 4)), (Fraction(1, 4), Fraction(1, 3))])
    assert S.intervals == ((0, Fraction(1, 3)), (Fraction(1, 2), Fraction(3, 4)))
    assert S.measure() == Fraction(7, 12)
    assert S.complement().measure() == Fraction(5, 12)
    assert not IntervalSet()


def test_central_map_shape():
    T = build_central_branch_map(2)
    assert T.exact
    assert len(T.branches) == 3
    assert T(Fraction(1, 2)) == Fraction(1, 2)
    assert T.derivative(Fraction(1, 2)) == 2
    assert T.branch_count() == 3


def test_beta_map_with_offset_is_circle():
    T = build_beta_map(3, Fraction(1, 5))
    assert T.circle
    assert T.branch_count() == 3
    assert T(Fraction(0)) == Fraction(1, 5)


@pytest.mark.parametrize(
    "branches",
    [
        (Branch(Fraction(0), Fraction(1, 2), Fraction(2), Fraction(0)),),
        (Branch(Fraction(0), Fraction(1), Fraction(1), Fraction(0)),),
        (
            Branch(Fraction(0), Fraction(1, 3), Fraction(3), Fraction(0)),
            Branch(Fraction(1, 3), Fraction(1), Fraction(3, 2), Fraction(-1, 2)),
            Branch(Fraction(1, 2), Fraction(1), Fraction(2), Fraction(-1)),
        ),
    ],
)
def test_invalid_maps_rejected(branches):
    with pytest.raises(ValueError):
        PiecewiseLinearMap(branches)


@given(maps)
def test_every_map_preserves_lebesgue(T):
    assert T.preserves_lebesgue()
    assert T.to_float().preserves_lebesgue()


@given(maps, interval_sets())
def test_preimage_measure_is_invariant(T, S):
    assert preimage(T, S).measure() == S.measure()


@given(maps, interval_sets())
def test_image_of_preimage_is_the_set(T, S):
    assert image(T, preimage(T, S)).intersect(S) == S


@given(maps, st.lists(st.fractions(0, 1, max_denominator=1000).filter(lambda x: x < 1), min_size=1, max_size=20))
def test_float_eval_matches_exact(T, xs):
    exact = np.array([float(T(x)) for x in xs])
    approx = T.eval_array(np.array([float(x) for x in xs]))
    assert np.allclose(exact, approx, atol=1e-12)


@given(maps)
def test_dict_round_trip(T):
    U = PiecewiseLinearMap.from_dict(T.to_dict())
    assert U.branches == T.branches
    assert U.circle == T.circle


def test_compose_preimage_order():
    T2 = build_beta_map(2)
    T3 = tripling_map()
    S = IntervalSet([(Fraction(0), Fraction(1, 7))])
    direct = preimage(T2, preimage(T3, S))
    assert compose_preimage([T2, T3], S) == direct
    assert direct.measure() == Fraction(1, 7)
