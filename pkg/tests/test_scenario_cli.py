import csv
import json
from fractions import Fraction

import numpy as np
import pytest
import yaml

from quenched_cp import cli, scenario

BASE = {
    "name": "tiny",
    "driving": {"kind": "fixed", "map": {"kind": "central", "gamma": 2}},
    "target": {"components": [{"center": "1/2"}]},
    "theta": {"method": "closed-form", "tag": "periodic", "params": {"alpha": "1/2"}},
    "run": {"n": 200, "samples": 20000, "n_grid": [100, 1000], "K": 4, "M": 10},
    "spectral": {"bins": 1024, "steps": 40, "burn_in": 10, "leb_h": [0.01]},
}


def write(tmp_path, raw, name="sc.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def test_every_preset_loads_and_hashes_stably():
    names = scenario.preset_names()
    assert len(names) == 9
    for name in names:
        a, b = scenario.load(name), scenario.load(name)
        assert a.config_hash == b.config_hash
        assert a.driving() is not None


def test_rational_strings_are_exact():
    assert scenario.num("1/3") == Fraction(1, 3)
    assert scenario.num("0.1") == Fraction(1, 10)
    with pytest.raises(scenario.ScenarioError):
        scenario.num("one third")


@pytest.mark.parametrize(
    "patch, key",
    [
        ({"colour": 1}, "scenario.colour"),
        ({"run": {"nn": 3}}, "run.nn"),
        ({"target": {"components": [{"center": "1/2", "width": 1}]}}, "target.components[0].width"),
        ({"driving": {"kind": "fixed", "map": {"kind": "central", "gama": 2}}}, "driving.map.gama"),
    ],
)
def test_unknown_keys_are_named(patch, key):
    with pytest.raises(scenario.ScenarioError, match=key.replace("[", r"\[").replace("]", r"\]")):
        scenario.parse(BASE | patch)


def test_invalid_map_is_a_config_error():
    with pytest.raises(scenario.ScenarioError):
        scenario.parse(BASE | {"driving": {"kind": "fixed", "map": {"kind": "central", "gamma": "1/2"}}})


def test_model_for_periodic_preset():
    sc = scenario.load("det-periodic")
    m = scenario.build_model(sc)
    assert m.vartheta == pytest.approx(0.5)
    assert m.sigma_bar == pytest.approx(3.0)


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_cli_all_stages(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["all", "--scenario", write(tmp_path, BASE), "--out", str(out)])
    assert code == cli.EXIT_OK
    for name in ("beta.csv", "theta.csv", "pmf.csv", "spectral.csv", "spectral_summary.csv",
                 "sim.csv", "sim_cf.csv", "clusters.csv", "compare.csv", "manifest.json"):
        assert (out / name).exists(), name
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_hash"] == scenario.load(write(tmp_path, BASE, "again.yaml")).config_hash
    assert set(man["files"]) >= {"sim.csv", "compare.csv"}
    theta = read(out / "theta.csv")
    s = np.array([float(r["s"]) for r in theta])
    mid = int(np.argmin(np.abs(s)))
    assert float(theta[mid]["re_theta"]) == pytest.approx(1.0)
    pmf = read(out / "pmf.csv")
    assert abs(float(pmf[3]["pmf_levy"]) - float(pmf[3]["pmf_pgf"])) < 1e-10
    assert "overall: pass" in capsys.readouterr().out


def test_cli_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "root"))
    assert cli.main(["pmf", "--scenario", write(tmp_path, BASE)]) == cli.EXIT_OK
    assert (tmp_path / "root" / "tiny" / "pmf.csv").exists()


def reason(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cli_config_error_exit(tmp_path, capsys):
    code = cli.main(["pmf", "--scenario", write(tmp_path, BASE | {"bogus": 1}), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert "scenario.bogus" in reason(capsys)["reason"]
    assert cli.main(["pmf", "--scenario", "no-such-preset", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["simulate", "--scenario", write(tmp_path, BASE), "--n", "1", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_cli_numerical_exit(tmp_path, capsys):
    raw = BASE | {"run": BASE["run"] | {"pmf_kmax": 2}}
    assert cli.main(["pmf", "--scenario", write(tmp_path, raw), "--out", str(tmp_path)]) == cli.EXIT_NUMERIC
    assert reason(capsys)["kind"] == "numerical"


def test_cli_threshold_exit(tmp_path, capsys):
    code = cli.main(["compare", "--scenario", write(tmp_path, BASE), "--tv-threshold", "1e-9",
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_THRESHOLD
    assert reason(capsys)["kind"] == "threshold"
    assert read(tmp_path / "compare.csv")[-1]["value"] == "0"


def test_cli_list_presets(capsys):
    assert cli.main(["list-presets"]) == cli.EXIT_OK
    assert "det-periodic" in capsys.readouterr().out
