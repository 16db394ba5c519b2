"""Scenario configuration: YAML parsing, validation and object construction.

Numbers may be written as integers, decimals or rational strings such as
``"1/3"``; they are parsed exactly into Fractions. Unknown keys are rejected
with the offending key named.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import ei
from .cpmodel import CompoundPoissonModel, from_mixture, geometric_jump
from .driving import DrivingSystem, Fixed, IIDShift, Rotation
from .maps import PiecewiseLinearMap, build_beta_map, build_central_branch_map, tripling_map
from .targets import Component, TargetFamily

STAGES = ("check", "beta", "theta", "spectral", "pmf", "simulate", "compare")
THETA_METHODS = ("closed-form", "series", "random-product", "iid-zeta")


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


def num(value, where: str = "value") -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ScenarioError(f"{where}: cannot parse number {value!r}") from exc


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    if not isinstance(block, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(block).__name__}")
    extra = sorted(set(block) - allowed)
    if extra:
        raise ScenarioError(f"unknown key {where}.{extra[0]}")


# ---------------------------------------------------------------------------
# config dataclasses
# ---------------------------------------------------------------------------
@dataclass
class RunConfig:
    n: int = 2000
    n_grid: list[int] = field(default_factory=lambda: [100, 1000, 10000])
    K: int = 10
    samples: int = 10**6
    seed: int = 1
    s_count: int = 33
    workers: int = 1
    pmf_kmax: int = 60
    M: int = 1000


@dataclass
class SpectralConfig:
    bins: int = 2**14
    burn_in: int = 50
    steps: int = 200
    s: list[float] = field(default_factory=lambda: [float(np.pi / 2), float(np.pi)])
    leb_h: list[float] = field(default_factory=lambda: [1e-2, 1e-3])


@dataclass
class Scenario:
    name: str
    description: str
    law: str
    raw: dict
    run: RunConfig
    spectral: SpectralConfig
    tv_threshold: float = 0.02
    stages: tuple[str, ...] = STAGES

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def s_grid(self) -> np.ndarray:
        return np.linspace(-np.pi, np.pi, self.run.s_count)

    def driving(self) -> DrivingSystem:
        return build_driving(self.raw["driving"])

    def targets(self, snap: int | None = None) -> TargetFamily:
        return build_targets(self.raw["target"], snap)

    def theta_block(self) -> dict:
        return self.raw.get("theta", {"method": "closed-form", "tag": "aperiodic"})

    def uses_scaling_guard(self) -> bool:
        return self.theta_block()["method"] in ("random-product", "iid-zeta") or (
            self.theta_block().get("tag") == "const-gamma"
        )

    def to_dict(self) -> dict:
        return {
            **self.raw,
            "run": asdict(self.run),
            "spectral": asdict(self.spectral),
            "compare": {"tv_threshold": self.tv_threshold},
            "stages": list(self.stages),
        }


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------
def _affine(value, where: str):
    """Constant or ``{const: a, omega: b}`` meaning ``a + b * omega``."""
    if isinstance(value, dict):
        _check_keys(value, {"const", "omega"}, where)
        a, b = num(value.get("const", 0), where), num(value.get("omega", 0), where)
        return lambda w: a + b * w
    c = num(value, where)
    return lambda w: c


def _map_builder(block: dict, where: str):
    _check_keys(block, {"kind", "gamma", "left", "right", "beta", "r"}, where)
    kind = block.get("kind")
    if kind == "central":
        g = _affine(block.get("gamma", 2), f"{where}.gamma")
        left, right = int(block.get("left", 1)), int(block.get("right", 1))
        cache: dict = {}

        def build(w=Fraction(0)):
            gw = g(w)
            if gw not in cache:
                try:
                    cache[gw] = build_central_branch_map(gw, left, right)
                except ValueError as exc:
                    raise ScenarioError(f"{where}: {exc}") from exc
            return cache[gw]

        return build
    if kind == "beta":
        try:
            T = build_beta_map(int(block.get("beta", 3)), num(block.get("r", 0), f"{where}.r"))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        return lambda w=None: T
    if kind == "tripling":
        T = tripling_map()
        return lambda w=None: T
    raise ScenarioError(f"{where}.kind: unknown map kind {kind!r}")


def build_map(block: dict, where: str = "map") -> PiecewiseLinearMap:
    return _map_builder(block, where)()


def build_driving(block: dict) -> DrivingSystem:
    kind = block.get("kind")
    if kind == "fixed":
        _check_keys(block, {"kind", "map", "t"}, "driving")
        return Fixed(build_map(block.get("map", {}), "driving.map"), num(block.get("t", 1), "driving.t"))
    if kind == "rotation":
        _check_keys(block, {"kind", "alpha", "omega0", "map", "t"}, "driving")
        mb = _map_builder(block.get("map", {}), "driving.map")
        return Rotation(
            num(block["alpha"], "driving.alpha"),
            lambda w: mb(w),
            _affine(block.get("t", 1), "driving.t"),
            num(block.get("omega0", 0), "driving.omega0"),
        )
    if kind == "iid":
        _check_keys(block, {"kind", "seed", "symbols"}, "driving")
        syms = block.get("symbols") or []
        if not syms:
            raise ScenarioError("driving.symbols: at least one symbol is required")
        probs, maps, ts = [], [], []
        for i, s in enumerate(syms):
            _check_keys(s, {"p", "map", "t"}, f"driving.symbols[{i}]")
            probs.append(float(num(s["p"], f"driving.symbols[{i}].p")))
            maps.append(build_map(s["map"], f"driving.symbols[{i}].map"))
            ts.append(num(s.get("t", 1), f"driving.symbols[{i}].t"))
        try:
            return IIDShift(tuple(probs), tuple(maps), tuple(ts), int(block.get("seed", 0)))
        except ValueError as exc:
            raise ScenarioError(f"driving: {exc}") from exc
    raise ScenarioError(f"driving.kind: unknown driving kind {kind!r}")


def build_targets(block: dict, snap: int | None = None) -> TargetFamily:
    _check_keys(block, {"components", "snap"}, "target")
    comps = []
    for i, c in enumerate(block.get("components", [])):
        _check_keys(c, {"center", "weight"}, f"target.components[{i}]")
        center = c["center"]
        if isinstance(center, list):
            center = tuple(num(v, f"target.components[{i}].center") for v in center)
        else:
            center = num(center, f"target.components[{i}].center")
        comps.append(Component(center, num(c.get("weight", 1), f"target.components[{i}].weight")))
    try:
        return TargetFamily(tuple(comps), snap=snap if snap is not None else block.get("snap"))
    except ValueError as exc:
        raise ScenarioError(f"target: {exc}") from exc


def _closed_form(block: dict) -> ei.ThetaFunction:
    params = {}
    for k, v in (block.get("params") or {}).items():
        params[k] = [float(num(x, f"theta.params.{k}")) for x in v] if isinstance(v, list) else float(num(v, f"theta.params.{k}"))
    try:
        return ei.theta_closed_form(block.get("tag", "aperiodic"), **params)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"theta.params: missing or bad parameter ({exc})") from exc


def _jump_for(theta: ei.ThetaFunction, k_max: int = 400):
    if theta.tag == "aperiodic":
        return np.array([0.0, 1.0])
    if theta.tag in ("periodic", "iid-zeta"):
        r = theta.params.get("alpha", theta.params.get("zeta"))
        return geometric_jump(r, k_max)
    return None


def build_model(sc: Scenario, d: DrivingSystem | None = None, f: TargetFamily | None = None) -> CompoundPoissonModel:
    """Limiting compound-Poisson model of the scenario."""
    d = d or sc.driving()
    f = f or sc.targets()
    block = sc.theta_block()
    method = block["method"]
    M = int(block.get("M", sc.run.M))
    if method == "closed-form":
        th = _closed_form(block)
        mix = ei.mixture(d, f, ei.constant_rule(th), M, sc.run.seed)
        return from_mixture(mix, th.tag, _jump_for(th))
    if method == "series":
        K = int(block.get("K", ei.truncation_lag(float(min(T.gamma_min for T in d.distinct_maps())))))
        mix = ei.mixture(d, f, ei.series_rule(f, K, sc.run.n_grid), 1 if d.kind == "fixed" else M, sc.run.seed)
        return from_mixture(mix, "exact-series")
    if method == "random-product":
        g = float(min(T.gamma_min for T in d.distinct_maps(64, sc.run.seed)))
        K = int(block.get("K", ei.truncation_lag(g)))
        mix = ei.mixture(d, f, ei.random_product_rule(K), M, sc.run.seed)
        return from_mixture(mix, "random-product")
    if method == "iid-zeta":
        if not isinstance(d, IIDShift):
            raise ScenarioError("theta.method iid-zeta needs an iid driving")
        mix = ei.iid_zeta_mixture(d, f)
        th = mix.entries[0][2]
        return from_mixture(mix, "iid-zeta", _jump_for(th))
    raise ScenarioError(f"theta.method: unknown method {method!r}")


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------
TOP_KEYS = {"name", "description", "law", "driving", "target", "theta", "run", "spectral", "compare", "stages"}


def parse(raw: dict[str, Any]) -> Scenario:
    _check_keys(raw, TOP_KEYS, "scenario")
    for key in ("name", "driving", "target"):
        if key not in raw:
            raise ScenarioError(f"missing key scenario.{key}")
    run_block = raw.get("run") or {}
    _check_keys(run_block, set(RunConfig.__dataclass_fields__), "run")
    spec_block = raw.get("spectral") or {}
    _check_keys(spec_block, set(SpectralConfig.__dataclass_fields__), "spectral")
    cmp_block = raw.get("compare") or {}
    _check_keys(cmp_block, {"tv_threshold"}, "compare")
    th = raw.get("theta") or {"method": "closed-form", "tag": "aperiodic"}
    _check_keys(th, {"method", "tag", "params", "K", "M"}, "theta")
    if th.get("method") not in THETA_METHODS:
        raise ScenarioError(f"theta.method: unknown method {th.get('method')!r}")
    stages = tuple(raw.get("stages") or STAGES)
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ScenarioError(f"stages: unknown stage {bad[0]!r}")
    sc = Scenario(
        name=str(raw["name"]),
        description=str(raw.get("description", "")),
        law=str(raw.get("law", "")),
        raw={k: raw[k] for k in ("name", "description", "law", "driving", "target") if k in raw} | {"theta": th},
        run=RunConfig(**run_block),
        spectral=SpectralConfig(**spec_block),
        tv_threshold=float(cmp_block.get("tv_threshold", 0.02)),
        stages=stages,
    )
    sc.driving()
    sc.targets()
    return sc


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("quenched_cp.presets").iterdir() if p.name.endswith(".yaml"))


def preset_path(name: str):
    return resources.files("quenched_cp.presets") / f"{name}.yaml"


def load(source: str | Path) -> Scenario:
    """Load a scenario from a YAML path or a preset name."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    elif str(source) in preset_names():
        text = preset_path(str(source)).read_text()
    else:
        raise ScenarioError(f"scenario {source!r} is neither a file nor a preset")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"YAML parse error: {exc}") from exc
    return parse(raw)


def list_presets() -> list[tuple[str, str, str]]:
    out = []
    for name in preset_names():
        raw = yaml.safe_load(preset_path(name).read_text())
        out.append((name, raw.get("law", ""), raw.get("description", "")))
    return out
