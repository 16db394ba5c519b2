"""Command-line front end: run pipeline stages on a scenario and write CSV tables.

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped,
4 threshold violation (compare TV above threshold, or a failed assumption
check when running ``check`` alone). Every failure prints one JSON reason
line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, checker, cpmodel, ei, sim, spectral
from .scenario import Scenario, ScenarioError, build_model, list_presets, load

OUT_ENV = "QCP_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_THRESHOLD = 0, 2, 3, 4
ALL_ORDER = ("check", "beta", "theta", "pmf", "spectral", "simulate", "compare")
KEEP_PATTERNS = 10000


class ThresholdError(RuntimeError):
    pass


@dataclass
class Context:
    sc: Scenario
    out: Path
    files: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict)

    @property
    def d(self):
        if "d" not in self._cache:
            self._cache["d"] = self.sc.driving()
        return self._cache["d"]

    @property
    def f(self):
        if "f" not in self._cache:
            self._cache["f"] = self.sc.targets()
        return self._cache["f"]

    @property
    def model(self) -> cpmodel.CompoundPoissonModel:
        if "model" not in self._cache:
            self._cache["model"] = build_model(self.sc, self.d, self.f)
        return self._cache["model"]

    def write(self, name: str, header: list[str], rows) -> None:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------
def stage_check(ctx: Context) -> None:
    if ctx.sc.uses_scaling_guard():
        try:
            hi, lo = ei.check_scaling_guard(ctx.d, ctx.f, M=ctx.sc.run.M, seed=ctx.sc.run.seed)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        ctx.info["scaling_guard"] = {"sup_t_ratio": hi, "inf_slope": lo}
    report = checker.check_all(ctx.d, ctx.f, seed=ctx.sc.run.seed)
    ctx.info["check"] = report.to_dict()
    ctx.info["check_passed"] = report.passed
    print(report.format())
    if not report.passed:
        print(f"warning: assumptions fail ({','.join(report.failures())})", file=sys.stderr)


def stage_beta(ctx: Context) -> None:
    sc = ctx.sc
    rows = []
    for n in sc.run.n_grid:
        b = ei.beta_exact(ctx.d, ctx.f, None, n, sc.run.K)
        rows += [(k, l, float(v), n) for k, r in enumerate(b.rows) for l, v in enumerate(r)]
    lim = ei.beta_limit(ctx.d, ctx.f, None, sc.run.K, sc.run.n_grid)
    rows += [(k, l, float(v), "limit") for k, r in enumerate(lim.rows) for l, v in enumerate(r)]
    ctx._cache["beta_limit"] = lim
    ctx.write("beta.csv", ["k", "l", "beta", "n"], rows)


def _anchor_theta(ctx: Context) -> ei.ThetaFunction:
    block = ctx.sc.theta_block()
    method = block["method"]
    anchor = ctx.d.default_anchor()
    fib = ctx.d.fiber_at(anchor, 0)
    if method == "closed-form":
        from .scenario import _closed_form

        return _closed_form(block)
    if method == "series":
        lim = ctx._cache.get("beta_limit")
        K = ei.truncation_lag(float(min(T.gamma_min for T in ctx.d.distinct_maps())))
        if lim is None or lim.K < K:
            lim = ei.beta_limit(ctx.d, ctx.f, anchor, K, ctx.sc.run.n_grid)
        return ei.theta_series(lim, float(fib.map.gamma_min), ctx.f.h_bound)
    g = float(min(T.gamma_min for T in ctx.d.distinct_maps(64, ctx.sc.run.seed)))
    return ei.random_product_rule(ei.truncation_lag(g))(ctx.d, anchor, fib)


def stage_theta(ctx: Context) -> None:
    s = ctx.sc.s_grid
    th = _anchor_theta(ctx)
    vals = th(s)
    Th = ctx.model.Theta(s)
    bound = np.full(len(s), th.tail)
    ctx.info["theta"] = {"tag": th.tag, "theta0": th.theta0, "sigma": th.sigma,
                         "vartheta": ctx.model.vartheta, "tbar": ctx.model.tbar}
    ctx.write(
        "theta.csv", ["s", "re_theta", "im_theta", "tail_bound", "re_Theta", "im_Theta"],
        zip(s, vals.real, vals.imag, bound, Th.real, Th.imag),
    )


def stage_pmf(ctx: Context) -> None:
    k = ctx.sc.run.pmf_kmax
    m = ctx.model
    levy = cpmodel.pmf_levy(m, k, max(cpmodel.DEFAULT_GRID, 4 * k))
    jump = cpmodel.x1_law(m, k).pmf
    pgf = cpmodel.pmf_pgf(m, k, jump if m.jump_pmf is None else m.jump_pmf)
    x1 = np.zeros(k + 1)
    x1[: min(len(jump), k + 1)] = jump[: k + 1]
    ctx.info["pmf"] = {"max_abs_levy_minus_pgf": float(np.max(np.abs(levy - pgf))),
                       "moments": list(cpmodel.moments(m))}
    ctx.write("pmf.csv", ["k", "pmf_levy", "pmf_pgf", "x1_pmf"], zip(range(k + 1), levy, pgf, x1))


def stage_spectral(ctx: Context) -> None:
    sp = ctx.sc.spectral
    f = ctx.sc.targets(snap=sp.bins)
    fib = ctx.d.fiber_at(ctx.d.default_anchor(), 0)
    t0 = float(f.t_of(fib))
    steps, summary = [], []
    for h in sp.leb_h:
        n = max(2, round(t0 / h))
        for s in sp.s:
            res = spectral.cocycle_multiplier(ctx.d, f, n, s, sp.bins, sp.burn_in, sp.steps)
            half = res.steps // 2
            ratio = spectral.perturbation_ratio(res, float(np.mean(res.leb_h[half:])))
            want = complex((1 - np.exp(1j * s)) * ctx.model.Theta(np.array([s]))[0] / ctx.model.tbar)
            rel = abs(ratio - want) / abs(want) if want != 0 else abs(ratio)
            eta = spectral.eta_bound(1.0, s, float(res.leb_h.max()))
            steps += [(s, h, j, lam.real, lam.imag) for j, lam in enumerate(res.multipliers)]
            summary.append((s, h, n, ratio.real, ratio.imag, want.real, want.imag, rel, eta))
    ctx.write("spectral.csv", ["s", "leb_h", "j", "re_lambda", "im_lambda"], steps)
    ctx.write(
        "spectral_summary.csv",
        ["s", "leb_h", "n", "re_ratio", "im_ratio", "re_expected", "im_expected", "rel_error", "eta_bound"],
        summary,
    )


def stage_simulate(ctx: Context) -> None:
    r = ctx.sc.run
    dist = sim.simulate(ctx.d, ctx.f, None, r.n, r.samples, r.seed, ctx.sc.s_grid, r.workers,
                        keep_patterns=min(KEEP_PATTERNS, r.samples))
    ctx._cache["dist"] = dist
    rep = sim.compare(dist, ctx.model)
    ctx._cache["report"] = rep
    counts = np.zeros(rep.k_max + 1, dtype=np.int64)
    counts[: len(dist.counts)] = dist.counts
    ctx.write(
        "sim.csv", ["k", "count", "empirical_p", "model_p", "z"],
        ((k, counts[k], e, m, z) for k, e, m, z in rep.rows()),
    )
    mcf = ctx.model.cf(ctx.sc.s_grid)
    ctx.write(
        "sim_cf.csv", ["s", "re_empirical", "im_empirical", "re_model", "im_model"],
        zip(ctx.sc.s_grid, dist.cf.real, dist.cf.imag, mcf.real, mcf.imag),
    )
    hist = sim.cluster_diagnostics(dist.patterns)
    ctx.write("clusters.csv", ["size", "count"], ((c, hist[c]) for c in range(1, len(hist))))


def stage_compare(ctx: Context) -> None:
    if "report" not in ctx._cache:
        stage_simulate(ctx)
    rep, dist = ctx._cache["report"], ctx._cache["dist"]
    mean, var = dist.mean_var()
    E, V, _, _ = cpmodel.moments(ctx.model)
    ok = rep.tv <= ctx.sc.tv_threshold
    rows = [
        ("tv", rep.tv), ("tv_threshold", ctx.sc.tv_threshold), ("cf_sup", rep.cf_sup),
        ("max_abs_z", float(np.max(np.abs(rep.z)))), ("mean_empirical", mean), ("var_empirical", var),
        ("mean_model", E), ("var_model", V), ("pass", int(ok)),
    ]
    ctx.info["compare"] = dict(rows)
    ctx.write("compare.csv", ["metric", "value"], rows)
    print(f"{ctx.sc.name}: TV={rep.tv:.5f} threshold={ctx.sc.tv_threshold} cf_sup={rep.cf_sup:.5f}")
    if not ok:
        raise ThresholdError(f"TV {rep.tv:.5f} exceeds threshold {ctx.sc.tv_threshold}")


STAGE_FUNCS = {
    "check": stage_check, "beta": stage_beta, "theta": stage_theta, "pmf": stage_pmf,
    "spectral": stage_spectral, "simulate": stage_simulate, "compare": stage_compare,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------
def _versions() -> dict:
    import numba
    import scipy
    import yaml

    return {"quenched_cp": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "pyyaml": yaml.__version__}


def write_manifest(ctx: Context, stages) -> None:
    sc = ctx.sc
    d = ctx.d
    manifest = {
        "scenario": sc.name,
        "config_hash": sc.config_hash,
        "config": sc.to_dict(),
        "seeds": {"run": sc.run.seed, "driving": getattr(d, "seed", None)},
        "stages": list(stages),
        "versions": _versions(),
        "files": dict(sorted(ctx.files.items())),
        "results": ctx.info,
    }
    (ctx.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _apply_overrides(sc: Scenario, args) -> None:
    if args.seed is not None:
        sc.run.seed = args.seed
    if args.workers is not None:
        sc.run.workers = args.workers
    if args.n is not None:
        sc.run.n = args.n
    if args.samples is not None:
        sc.run.samples = args.samples
    if args.sgrid is not None:
        sc.run.s_count = args.sgrid
    if args.tv_threshold is not None:
        sc.tv_threshold = args.tv_threshold
    if sc.run.n < 1 or sc.run.samples < 1 or sc.run.workers < 1:
        raise ScenarioError("n, samples and workers must be positive")


def _out_dir(sc: Scenario, out: str | None) -> Path:
    path = Path(out) if out else Path(os.environ.get(OUT_ENV, "runs")) / sc.name
    path.mkdir(parents=True, exist_ok=True)
    return path


def run(command: str, scenario: str, args) -> int:
    sc = load(scenario)
    _apply_overrides(sc, args)
    ctx = Context(sc, _out_dir(sc, args.out))
    stages = [s for s in ALL_ORDER if s in sc.stages] if command == "all" else [command]
    try:
        for st in stages:
            STAGE_FUNCS[st](ctx)
    finally:
        write_manifest(ctx, stages)
    if command == "check" and not ctx.info.get("check_passed", True):
        raise ThresholdError("assumption check failed: " + ",".join(
            k for k, v in ctx.info["check"].items() if v["status"] == checker.FAIL))
    return EXIT_OK


def _reason(code: int, kind: str, msg: str) -> int:
    print(json.dumps({"exit": code, "kind": kind, "reason": msg}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenched-cp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list-presets", help="list preset scenarios")
    for name in (*ALL_ORDER, "all"):
        q = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage")
        q.add_argument("--scenario", required=True, help="YAML path or preset name")
        q.add_argument("--seed", type=int)
        q.add_argument("--workers", type=int)
        q.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or runs/<name>)")
        q.add_argument("--n", type=int)
        q.add_argument("--samples", type=int)
        q.add_argument("--sgrid", type=int, help="number of s points on [-pi, pi]")
        q.add_argument("--tv-threshold", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        for name, law, desc in list_presets():
            print(f"{name:<24} {law:<48} {desc}")
        return EXIT_OK
    try:
        return run(args.command, args.scenario, args)
    except ScenarioError as exc:
        return _reason(EXIT_CONFIG, "config", str(exc))
    except (ei.NumericalGuardError, spectral.SpectralFailure, FloatingPointError) as exc:
        return _reason(EXIT_NUMERIC, "numerical", str(exc))
    except ThresholdError as exc:
        return _reason(EXIT_THRESHOLD, "threshold", str(exc))
    except ValueError as exc:
        # parameter combinations rejected downstream, e.g. t/n >= 1
        return _reason(EXIT_CONFIG, "config", str(exc))


if __name__ == "__main__":
    sys.exit(main())
