import json
import os

import pytest

from kscontrol import cli, moment_control as mc

CFG = os.path.join(os.path.dirname(os.path.dirname(__file__)), "configs")


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def small_cfg(tmp_path):
    return _write(tmp_path / "run.cfg", "scenario = interior_u\nT = 1.0\nkc = 4\nwindow = 0.75\n")


def test_spectrum_files(tmp_path):
    assert cli.main(["spectrum", "--kmax", "50", "--out", str(tmp_path)]) == 0
    csvs = sorted(f for f in os.listdir(tmp_path) if f.endswith(".csv"))
    assert len(csvs) == 7
    summary = json.loads((tmp_path / "spectrum.json").read_text())
    assert summary["checks_pass"] and summary["min_gap"] > 0


def test_spectrum_zero_and_negative(tmp_path, capsys):
    assert cli.main(["spectrum", "--kmax", "0", "--out", str(tmp_path)]) == 0
    assert os.listdir(tmp_path) == ["spectrum.json"]
    assert cli.main(["spectrum", "--kmax", "-1"]) == 2
    assert capsys.readouterr().err.startswith("error:usage:")


@pytest.mark.parametrize("argv", [[], ["nonsense"], ["synthesize", "--T", "abc"]])
def test_usage_errors(argv):
    assert cli.main(argv) == 2


def test_config_parsing(tmp_path):
    bad = _write(tmp_path / "bad.cfg", "colour = blue\n")
    assert cli.main(["synthesize", "--config", bad, "--init", os.path.join(CFG, "init_k3.json")]) == 2
    p = _write(tmp_path / "ok.cfg", "# comment\nT = 2.0  # trailing\nscenario=boundary_v\n")
    cfg = cli.read_config(p)
    assert cfg == {"T": "2.0", "scenario": "boundary_v"}
    reducible = _write(tmp_path / "r.cfg", "rho_poly = 1,-3,2\n")
    assert cli.main(["synthesize", "--config", reducible,
                     "--init", os.path.join(CFG, "init_k3.json")]) == 2


@pytest.mark.parametrize("scenario,theorem", [("interior_u", "interior_u"), ("boundary_v", "boundary_v")])
def test_constraint_violation(tmp_path, capsys, scenario, theorem):
    rc = cli.main(["synthesize", "--scenario", scenario, "--init",
                   os.path.join(CFG, "init_bad_mean.json"), "--out", str(tmp_path)])
    assert rc == 4
    err = capsys.readouterr().err
    assert err.startswith("error:constraint:") and mc.THEOREMS[theorem] in err


def test_synthesize_verify_deterministic(tmp_path, small_cfg):
    init = os.path.join(CFG, "init_k3.json")
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert cli.main(["synthesize", "--config", small_cfg, "--init", init, "--out", out]) == 0
        outs.append(out)
    for f in ("control.json", "control.csv", "residuals.json"):
        with open(os.path.join(outs[0], f), "rb") as a, open(os.path.join(outs[1], f), "rb") as b:
            assert a.read() == b.read()
    ctrl = os.path.join(outs[0], "control.json")
    assert cli.main(["verify", "--config", small_cfg, "--init", init, "--control", ctrl,
                     "--out", outs[0], "--tol", "1e-3"]) == 0
    assert cli.main(["simulate", "--config", small_cfg, "--init", init, "--control", ctrl,
                     "--out", outs[0]]) == 0
    assert os.path.exists(os.path.join(outs[0], "trajectory.csv"))
    # horizon mismatch
    assert cli.main(["verify", "--config", small_cfg, "--T", "2", "--init", init,
                     "--control", ctrl]) == 2


def test_verify_zero_control_fails(tmp_path, small_cfg):
    sig = mc.exp_signal(1.0, [0.0], [0.0], window=0.75)
    sig.meta["K_c"] = 4
    p = str(tmp_path / "zero.json")
    sig.save(p)
    rc = cli.main(["verify", "--config", small_cfg, "--init", os.path.join(CFG, "init_k3.json"),
                   "--control", p, "--out", str(tmp_path)])
    assert rc == 3


def test_free_simulation(tmp_path, small_cfg):
    assert cli.main(["simulate", "--config", small_cfg, "--init",
                     os.path.join(CFG, "init_k3.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "simulation.json").read_text())
    assert rep["dual_norm"] > 0


def test_biortho_command(tmp_path):
    assert cli.main(["biortho", "--T", "1", "--kmax", "2", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "biortho.json").read_text())
    assert meta["residual"] < 1e-20 and meta["n"] == 9


def test_figures_command(tmp_path):
    assert cli.main(["figures", "--kmax", "5", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "entire_functions.csv").read_text().splitlines()
    assert text[0].startswith("x,log_P") and len(text) == 62
