from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quenched_cp import cpmodel, sim
from quenched_cp.driving import Fixed
from quenched_cp.maps import build_central_branch_map
from quenched_cp.targets import Component, TargetFamily

T2 = build_central_branch_map(2)
D = Fixed(T2, Fraction(1))
F = TargetFamily((Component(Fraction(1, 2)),))


@pytest.fixture(scope="module")
def periodic_run():
    return sim.simulate(D, F, n=500, samples=200_000, seed=3, keep_patterns=5000)


def test_worker_count_does_not_change_counts():
    a, _ = sim.orbit_counts(D, F, None, 300, 100_000, seed=9, workers=1)
    b, _ = sim.orbit_counts(D, F, None, 300, 100_000, seed=9, workers=4)
    assert np.array_equal(a, b)


def test_seed_changes_counts():
    a, _ = sim.orbit_counts(D, F, None, 200, 50_000, seed=1)
    b, _ = sim.orbit_counts(D, F, None, 200, 50_000, seed=2)
    assert not np.array_equal(a, b)


def test_fixed_point_law(periodic_run):
    rep = sim.compare(periodic_run, cpmodel.polya_aeppli_model(0.5, 0.5))
    assert rep.tv < 0.01
    wrong = sim.compare(periodic_run, cpmodel.poisson_model(1.0))
    assert wrong.tv > 0.2


def test_empirical_cf_and_moment_errors(periodic_run):
    assert periodic_run.empirical_cf([0.0])[0] == pytest.approx(1.0)
    m, v = periodic_run.mean_var()
    se_m, se_v = periodic_run.moment_standard_errors()
    assert abs(m - 1) < 4 * se_m
    assert abs(v - 3) < 4 * se_v


def test_cluster_sizes_are_geometric(periodic_run):
    hist = sim.cluster_diagnostics(periodic_run.patterns)
    assert hist[1] > 0
    assert hist[2] / hist[1] == pytest.approx(0.5, abs=0.1)


def test_cluster_diagnostics_runs():
    hist = sim.cluster_diagnostics([np.array([3, 4, 5, 9]), np.array([], dtype=int), np.array([1])], cap=4)
    assert list(hist) == [0, 2, 0, 1, 0]


weights = st.lists(st.integers(0, 100), min_size=1, max_size=30).filter(lambda w: sum(w) > 0)


@given(weights, weights)
def test_total_variation_is_a_metric_on_pmfs(a, b):
    p = np.array(a) / sum(a)
    q = np.array(b) / sum(b)
    tv = sim.total_variation(p, q)
    assert 0 <= tv <= 1 + 1e-9
    assert tv == pytest.approx(sim.total_variation(q, p))
    assert sim.total_variation(p, p) == pytest.approx(0, abs=1e-12)


def test_beta_monte_carlo_matches_exact():
    est, se = sim.beta_monte_carlo(D, F, None, n=1000, k=2, samples=200_000, seed=4)
    assert abs(est[2] - 1 / 8) < 4 * se[2] + 1e-3
    assert est[0] == pytest.approx(0, abs=1e-3)


def test_rejects_empty_runs():
    with pytest.raises(ValueError):
        sim.simulate(D, F, n=0, samples=10)
