"""Acceptance criteria, one marker per criterion.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
Simulations use 10^6 samples and are shared between criteria: n = 2000 where a
criterion fixes it, n = 10^4 for the moment check, where finite-n short-return
overlaps at n = 2000 shift the variance by several standard errors.
"""
from __future__ import annotations

import filecmp
import time
from fractions import Fraction

import numpy as np
import pytest

from quenched_cp import checker, cli, cpmodel, ei, scenario, sim, spectral
from quenched_cp.driving import Fixed

PRESETS = scenario.preset_names()
SAMPLES = 10**6
N = 2000
N_MOMENTS = 10**4

# preset -> (vartheta, rho) of its Polya-Aeppli law (rho = 0 is Poisson)
PA_LAWS = {
    "det-periodic": (0.5, 0.5),
    "det-aperiodic": (1.0, 0.0),
    "rand-beta": (1.0, 0.0),
    "rand-iid": (0.625, 0.375),
    "rand-const-gamma": (None, 1 / 3),
}

_SIMS: dict[tuple[str, int], tuple[sim.HitCountDistribution, float]] = {}
_MODELS: dict[str, cpmodel.CompoundPoissonModel] = {}


def criterion(num, title):
    return pytest.mark.criterion(num, title)


def model_for(name):
    if name not in _MODELS:
        _MODELS[name] = scenario.build_model(scenario.load(name))
    return _MODELS[name]


def simulated(name, n=N):
    if (name, n) not in _SIMS:
        sc = scenario.load(name)
        t0 = time.perf_counter()
        dist = sim.simulate(sc.driving(), sc.targets(), n=n, samples=SAMPLES, seed=sc.run.seed)
        _SIMS[name, n] = (dist, time.perf_counter() - t0)
    return _SIMS[name, n]


def report(request, label, **values):
    line = label + " " + " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
    request.node.user_properties.append(("report", line))
    print(line)


# ---------------------------------------------------------------------------
# 1
# ---------------------------------------------------------------------------
@criterion(1, "fixed-point target reproduces PA(1/2, 1/2), TV <= 0.02 in <= 2 min")
def test_c1_polya_aeppli_reproduction(request):
    dist, secs = simulated("det-periodic")
    ref = cpmodel.pmf_polya_aeppli(0.5, 0.5, 80)
    tv = sim.total_variation(dist.pmf, ref)
    report(request, "c1", tv=tv, seconds=secs)
    assert tv <= 0.02
    assert secs <= 120


# ---------------------------------------------------------------------------
# 2
# ---------------------------------------------------------------------------
@criterion(2, "aperiodic targets give Poisson(1), TV <= 0.02")
@pytest.mark.parametrize("name", ["det-aperiodic", "rand-beta"])
def test_c2_standard_poisson(request, name):
    dist, _ = simulated(name)
    tv = sim.total_variation(dist.pmf, cpmodel.pmf_poisson(1.0, 40))
    report(request, f"c2 {name}", tv=tv)
    assert tv <= 0.02


# ---------------------------------------------------------------------------
# 3
# ---------------------------------------------------------------------------
@criterion(3, "i.i.d. slopes 2/4 give PA with rho = 3/8 exactly; TV <= 0.03")
def test_c3_iid_zeta_model_is_exact(request):
    sc = scenario.load("rand-iid")
    d = sc.driving()
    slopes = {}
    for p, T in zip(d.probs, d.maps):
        g = T.derivative(Fraction(1, 2))
        slopes[g] = slopes.get(g, 0) + Fraction(p).limit_denominator()
    assert slopes == {2: Fraction(1, 2), 4: Fraction(1, 2)}
    zeta = sum(p / g for g, p in slopes.items())
    assert zeta == Fraction(3, 8)
    m = model_for("rand-iid")
    jump = cpmodel.x1_law(m, 60).pmf
    assert np.max(np.abs(jump - cpmodel.geometric_jump(3 / 8, 60))) < 1e-10


@criterion(3, "i.i.d. slopes 2/4 give PA with rho = 3/8 exactly; TV <= 0.03")
def test_c3_iid_zeta_simulation(request):
    dist, _ = simulated("rand-iid")
    tv = sim.total_variation(dist.pmf, cpmodel.pmf_polya_aeppli(0.625, 0.375, 80))
    report(request, "c3", tv=tv)
    assert tv <= 0.03


# ---------------------------------------------------------------------------
# 4
# ---------------------------------------------------------------------------
@criterion(4, "exact beta oracles at n in {1e2, 1e3, 1e4} within 2/n")
@pytest.mark.parametrize("n", [100, 1000, 10000])
def test_c4_beta_oracle(request, n):
    sc = scenario.load("det-periodic")
    table = ei.beta_exact(sc.driving(), sc.targets(), n=n, K=3)
    assert table.exact
    assert abs(table.rows[0][0] - Fraction(1, 2)) <= Fraction(2, n)
    # fixed point: period r = 1, so lag r*b - 1 = b - 1 and alpha = 1/2
    for b in range(1, 5):
        err = abs(table.rows[b - 1][b - 1] - Fraction(1, 2) ** b)
        report(request, f"c4 n={n} b={b}", err=float(err))
        assert err <= Fraction(2, n)


# ---------------------------------------------------------------------------
# 5
# ---------------------------------------------------------------------------
@criterion(5, "qhat -> beta -> qhat round trip to 1e-10 for every table with k <= 8")
@pytest.mark.parametrize("name", PRESETS)
def test_c5_round_trip(request, name):
    sc = scenario.load(name)
    d, f = sc.driving(), sc.targets()
    tables = [ei.beta_exact(d, f, n=1000, K=8), ei.beta_limit(d, f, K=8, n_grid=(100, 1000))]
    worst, conds = 0.0, []
    for table in tables:
        for k in range(table.K + 1):
            row = table.row(k)
            s = np.arange(1, k + 2, dtype=float)
            q = ei.qhat_row(row, s)
            ext = ei.beta_from_qhat(q)
            conds.append(ext.cond)
            worst = max(worst, float(np.max(np.abs(ext.beta - row))),
                        float(np.max(np.abs(ei.qhat_row(ext.beta, s) - q))))
    report(request, f"c5 {name}", max_err=worst, max_cond=max(conds))
    assert worst <= 1e-10


# ---------------------------------------------------------------------------
# 6
# ---------------------------------------------------------------------------
@criterion(6, "pmf_levy = pmf_pgf = closed form within 1e-8 (k <= 30); mass 1 within 1e-6")
@pytest.mark.parametrize("name", sorted(PA_LAWS))
def test_c6_three_way_pmf(request, name):
    m = model_for(name)
    v, rho = PA_LAWS[name]
    v = m.vartheta if v is None else v
    k = 30
    levy = cpmodel.pmf_levy(m, k)
    pgf = cpmodel.pmf_pgf(m, k, cpmodel.x1_law(m, k).pmf)
    closed = cpmodel.pmf_polya_aeppli(v, rho, k)
    gaps = (np.max(np.abs(levy - pgf)), np.max(np.abs(levy - closed)), np.max(np.abs(pgf - closed)))
    K = cpmodel.mass_cutoff(m, 1 - 1e-9)
    sums = (cpmodel.pmf_levy(m, K, max(4096, 4 * K)).sum(),
            cpmodel.pmf_pgf(m, K, cpmodel.x1_law(m, K).pmf).sum(),
            cpmodel.pmf_polya_aeppli(v, rho, K).sum())
    report(request, f"c6 {name}", max_gap=float(max(gaps)), worst_mass=float(max(abs(s - 1) for s in sums)))
    assert max(gaps) <= 1e-8
    assert all(abs(s - 1) <= 1e-6 for s in sums)


# ---------------------------------------------------------------------------
# 7
# ---------------------------------------------------------------------------
@criterion(7, "spectral first-order law within 10% at Leb(H) = 1e-3 with 2^14 bins, error shrinking, <= 1 min")
def test_c7_spectral_law(request):
    bins = 2**14
    d = Fixed(scenario.load("det-periodic").driving().distinct_maps()[0], Fraction(1))
    f = scenario.load("det-periodic").targets(snap=bins)
    theta = ei.theta_closed_form("periodic", alpha=0.5)
    t0 = time.perf_counter()
    errors = {}
    for s in (np.pi / 2, np.pi):
        want = complex((1 - np.exp(1j * s)) * theta(np.array([s]))[0])
        for h in (1e-2, 1e-3):
            res = spectral.cocycle_multiplier(d, f, round(1 / h), s, bins)
            leb = float(np.mean(res.leb_h[res.steps // 2:]))
            errors[s, h] = abs(spectral.perturbation_ratio(res, leb) - want) / abs(want)
            report(request, f"c7 s={s:.4f} h={h:g}", rel_err=errors[s, h])
    secs = time.perf_counter() - t0
    report(request, "c7", seconds=secs)
    for s in (np.pi / 2, np.pi):
        assert errors[s, 1e-3] < errors[s, 1e-2]
        assert errors[s, 1e-3] <= 0.10
    assert secs <= 60


# ---------------------------------------------------------------------------
# 8
# ---------------------------------------------------------------------------
@criterion(8, "model mean/variance within 4 SE of 10^6 samples; PA gamma=2 model has E=1, Var=2")
@pytest.mark.parametrize("name", PRESETS)
def test_c8_moments_match_simulation(request, name):
    dist, _ = simulated(name, N_MOMENTS)
    E, V, _, _ = cpmodel.moments(model_for(name))
    m, v = dist.mean_var()
    se_m, se_v = dist.moment_standard_errors()
    report(request, f"c8 {name}", z_mean=(m - E) / se_m, z_var=(v - V) / se_v)
    assert abs(m - E) <= 4 * se_m
    assert abs(v - V) <= 4 * se_v


@criterion(8, "model mean/variance within 4 SE of 10^6 samples; PA gamma=2 model has E=1, Var=2")
def test_c8_pa_gamma2_literal_values(request):
    # stated literally: E(Z) = 1 and Var(Z) = 2 for the slope-2 fixed-point model
    E, V, _, _ = cpmodel.moments(model_for("det-periodic"))
    report(request, "c8 literal", mean=E, var=V)
    assert E == pytest.approx(1.0, abs=1e-12)
    assert V == pytest.approx(2.0, abs=1e-12)


@criterion(8, "model mean/variance within 4 SE of 10^6 samples; PA gamma=2 model has E=1, Var=2")
def test_c8_pa_gamma2_from_geometric_jumps(request):
    # PA(1/2, 1/2): Var = vartheta * E[X^2] = (1/2) * (1 + rho) / (1 - rho)^2 = 3
    E, V, EX, VX = cpmodel.moments(model_for("det-periodic"))
    assert (E, V, EX, VX) == pytest.approx((1.0, 3.0, 2.0, 2.0), abs=1e-12)


# ---------------------------------------------------------------------------
# 9
# ---------------------------------------------------------------------------
@criterion(9, "half-exponent self-convolution identity within 1e-8")
@pytest.mark.parametrize("name", PRESETS)
def test_c9_infinite_divisibility(request, name):
    gap = cpmodel.self_convolution_gap(model_for(name))
    report(request, f"c9 {name}", gap=gap)
    assert gap <= 1e-8


# ---------------------------------------------------------------------------
# 10
# ---------------------------------------------------------------------------
@criterion(10, "every preset passes F1-F9 with witnesses; reported N' is minimal")
@pytest.mark.parametrize("name", PRESETS)
def test_c10_checker(request, name):
    sc = scenario.load(name)
    rep = checker.check_all(sc.driving(), sc.targets(), seed=sc.run.seed)
    print(rep.format())
    report(request, f"c10 {name}", overall="pass" if rep.passed else "fail",
           N_prime=rep.conditions["F8"].witness["N'"], k_o=rep.conditions["F9"].witness.get("k_o(N')"))
    assert rep.passed
    assert all(c.witness for c in rep.conditions.values())
    w = rep.conditions["F8"].witness
    h, n_prime = w["h"], w["N'"]
    sup_g = 1 / Fraction(w["gamma_min"])
    assert checker.f8_holds(h, n_prime, sup_g, w["inf L1"])
    assert n_prime == 1 or not checker.f8_holds(h, n_prime - 1, sup_g, w["inf L1"])


# ---------------------------------------------------------------------------
# 11
# ---------------------------------------------------------------------------
@criterion(11, "byte-identical CSVs for 1 vs 8 workers")
@pytest.mark.parametrize("name", ["det-periodic", "rand-iid"])
def test_c11_worker_determinism(request, tmp_path, name):
    outs = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}"
        code = cli.main(["all", "--scenario", name, "--samples", "200000", "--workers", str(workers),
                         "--out", str(out)])
        assert code == cli.EXIT_OK
        outs.append(out)
    csvs = sorted(p.name for p in outs[0].glob("*.csv"))
    assert "sim.csv" in csvs and "compare.csv" in csvs
    match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], csvs, shallow=False)
    report(request, f"c11 {name}", files=len(match))
    assert mismatch == [] and errors == []
