from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.io import mmread

from quenched_cp import spectral
from quenched_cp.driving import Fixed
from quenched_cp.maps import IntervalSet, build_beta_map, build_central_branch_map, tripling_map
from quenched_cp.targets import Component, TargetFamily

maps = st.one_of(
    st.builds(build_central_branch_map, st.sampled_from([2, 3, Fraction(5, 2), 4]), st.integers(1, 2), st.integers(1, 2)),
    st.builds(build_beta_map, st.integers(2, 5), st.sampled_from([0, Fraction(1, 7), Fraction(2, 5)])),
)


@given(maps, st.sampled_from([16, 64, 256, 1000]))
def test_ulam_matrix_is_row_stochastic(T, N):
    M = spectral.build_ulam(T, N).matrix
    assert M.shape == (N, N)
    assert M.min() >= 0
    assert np.allclose(np.asarray(M.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    # Lebesgue invariance: uniform mass is fixed
    assert np.allclose(M.T @ np.full(N, 1.0 / N), 1.0 / N, atol=1e-12)


def test_tripling_on_three_bins():
    M = spectral.build_ulam(tripling_map(), 3).matrix.toarray()
    assert np.allclose(M, 1 / 3)


@given(st.floats(-np.pi, np.pi).filter(lambda s: s != 0), st.fractions(0, Fraction(9, 10)))
def test_twist_factors(s, a):
    H = IntervalSet([(a, a + Fraction(1, 10))])
    tw = spectral.bin_twist(64, H, s)
    assert np.all(np.abs(tw) <= 1 + 1e-12)
    frac = (tw.real - 1) / (np.cos(s) - 1) if abs(np.cos(s) - 1) > 1e-9 else None
    if frac is not None:
        assert frac.sum() / 64 == pytest.approx(0.1, abs=1e-9)
    assert spectral.bin_twist(64, H, 0.0) is None


def test_twist_at_pi_flips_covered_bin():
    tw = spectral.bin_twist(4, IntervalSet([(Fraction(1, 4), Fraction(1, 2))]), np.pi)
    assert np.allclose(tw, [1, -1, 1, 1])


def test_dense_and_arpack_agree():
    T = build_central_branch_map(2)
    H = IntervalSet([(Fraction(31, 64), Fraction(33, 64))])
    op = spectral.build_ulam(T, 256, twist=(H, np.pi / 2))
    assert spectral.leading_eigenvalue(op, "dense") == pytest.approx(spectral.leading_eigenvalue(op, "arpack"), abs=1e-8)
    assert spectral.leading_eigenvalue(spectral.build_ulam(T, 256)) == pytest.approx(1.0)


def test_cocycle_first_order_law_coarse():
    d = Fixed(build_central_branch_map(2), Fraction(1))
    f = TargetFamily((Component(Fraction(1, 2)),), snap=2**12)
    res = spectral.cocycle_multiplier(d, f, n=100, s=np.pi, N=2**12, K=100)
    ratio = spectral.perturbation_ratio(res)
    want = 2 / 3  # (1 - e^{i pi}) theta(pi) with theta(pi) = 1 - 2 * (1/2) / (1 + 1/2)
    assert abs(ratio - want) / want < 0.1
    assert res.steps == 100


def test_untwisted_multiplier_is_one():
    d = Fixed(tripling_map(), Fraction(1))
    f = TargetFamily((Component(Fraction(1, 3)),))
    res = spectral.cocycle_multiplier(d, f, n=50, s=0.0, N=512, K=20)
    assert np.allclose(res.multipliers, 1.0)


def test_eta_bound_and_guards(tmp_path):
    assert spectral.eta_bound(1.0, np.pi, 1e-3) == pytest.approx(4e-3)
    with pytest.raises(ValueError):
        spectral.eta_bound(-1.0, 1.0, 1e-3)
    with pytest.raises(ValueError):
        spectral.build_ulam(tripling_map(), 1)
    op = spectral.build_ulam(tripling_map(), 9)
    spectral.dump_coo(op, tmp_path / "T.mtx")
    assert np.allclose(mmread(str(tmp_path / "T.mtx")).toarray(), op.matrix.toarray())
