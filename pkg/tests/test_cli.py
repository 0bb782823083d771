import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from eitmem import cli, memory_sim

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def manifest_of(out: Path):
    (m,) = out.glob("*_manifest.json")
    return json.loads(m.read_text())


@pytest.mark.parametrize("name", ["spectrum", "slowlight", "store", "sweep-xi", "coincidence",
                                  "fit-g2", "fit-od"])
def test_bundled_configs_run(name, tmp_path):
    t0 = time.perf_counter()
    status = cli.run(CONFIGS / f"{name}.toml", out=tmp_path)
    elapsed = time.perf_counter() - t0
    assert status == 0
    assert elapsed < 60
    man = manifest_of(tmp_path)
    assert man["scenario"] == name
    assert man["version"] == "0.1.0"
    assert "decoherence" in man["parameters"] and "k" in man["parameters"]["decoherence"]
    for f in man["outputs"]:
        assert (tmp_path / f).exists()
        assert f.startswith(f"{name}-")


def test_store_manifest_efficiency(tmp_path):
    cli.run(CONFIGS / "store.toml", out=tmp_path)
    res = manifest_of(tmp_path)["results"]
    assert res["efficiency"] == pytest.approx(0.36, abs=0.06)
    assert abs(res["energy_closure_error"]) < 5e-3


def test_sweep_manifest_and_table(tmp_path):
    cli.run(CONFIGS / "sweep-xi.toml", out=tmp_path)
    man = manifest_of(tmp_path)
    assert man["results"]["rows"] == 6
    assert {"gamma_s", "bandwidth_exponent", "exp_fit_r2"} <= set(man["results"])
    table = np.loadtxt(tmp_path / man["outputs"][0], delimiter=",", skiprows=1)
    assert table.shape == (6, 3)
    assert np.allclose(table[:, 0], memory_sim.REF_XI)


def test_empty_config(tmp_path, capsys):
    cfg = tmp_path / "empty.toml"
    cfg.write_text("")
    out = tmp_path / "out"
    assert cli.run(cfg, out=out) != 0
    assert "configuration is empty" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


@pytest.mark.parametrize("text,path", [
    ('scenario = "store"\n[medium]\noptical_dept = 5.0\n', "medium.optical_dept"),
    ('scenario = "store"\n[medium]\noptical_depth = "deep"\n', "medium.optical_depth"),
    ('scenario = "store"\n[mediums]\nx = 1\n', "mediums"),
    ('scenario = "store"\ncolour = 1\n', "colour"),
    ('scenario = "store"\n[medium]\noptical_depth = -1.0\n', "medium"),
    ('scenario = "store"\n[schedule]\nxi_values = [1.0, 20.0]\n', "schedule.xi_values"),
    ('scenario = "store"\n[detection]\ncollection_eff = 2.0\n', "detection"),
    ('scenario = "teleport"\n', "scenario"),
    ('seed = 1\n', "scenario"),
])
def test_validation_reports_key_path(tmp_path, capsys, text, path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    assert cli.run(cfg, out=tmp_path / "out") == 2
    err = capsys.readouterr().err
    assert f"config error: {path}" in err
    assert not (tmp_path / "out").exists()


def test_determinism_and_seed(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    cli.run(CONFIGS / "coincidence.toml", out=a)
    cli.run(CONFIGS / "coincidence.toml", out=b)
    cli.run(CONFIGS / "coincidence.toml", out=c, seed=99)
    fa = sorted(p.name for p in a.iterdir())
    assert fa == sorted(p.name for p in b.iterdir())
    for name in fa:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert sorted(p.name for p in c.iterdir()) != fa
    assert manifest_of(c)["seed"] == 99


def test_scenario_override(tmp_path):
    assert cli.run(CONFIGS / "store.toml", out=tmp_path, scenario="spectrum") == 0
    assert manifest_of(tmp_path)["scenario"] == "spectrum"


def test_units_converted_once(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('scenario = "spectrum"\n[medium]\nOmega_c_MHz = 10.0\nGamma_MHz = 6.0\n'
                   '[schedule]\nt_off_ns = 40.0\nstorage_ns = 200.0\n')
    r = cli.resolve(cli.load_config(cfg))
    assert r["medium"].Omega_c == pytest.approx(2 * np.pi * 10e6)
    assert r["medium"].Gamma == pytest.approx(2 * np.pi * 6e6)
    assert r["schedule"].t_off == pytest.approx(40e-9)
    assert r["schedule"].storage_time == pytest.approx(200e-9)
    assert r["medium"].gamma_gs == pytest.approx(0.065 * 2 * np.pi * 6e6)


def test_defaults_are_operating_point():
    r = cli.resolve({"scenario": "store"})
    op = memory_sim.reference_operating_point()
    assert r["medium"] == op.medium
    assert r["schedule"] == op.schedule
    assert r["decoherence"] == op.decoherence


def test_partial_sweep_failure(tmp_path, monkeypatch):
    real = memory_sim.simulate_storage

    def flaky(f, p, s, d=None, **kw):
        if s.xi > 3:
            raise memory_sim.InstabilityError("boom")
        return real(f, p, s, d, **kw)

    monkeypatch.setattr(memory_sim, "simulate_storage", flaky)
    assert cli.run(CONFIGS / "sweep-xi.toml", out=tmp_path) == 1
    man = manifest_of(tmp_path)
    assert man["results"]["completed_rows"] == 3
    table = np.loadtxt(tmp_path / man["outputs"][0], delimiter=",", skiprows=1)
    assert table.shape == (3, 3)


def test_fit_od_from_data(tmp_path):
    cli.run(CONFIGS / "fit-od.toml", out=tmp_path / "a")
    synth = next((tmp_path / "a").glob("*_synthetic.csv"))
    cfg = tmp_path / "d.toml"
    cfg.write_text(f'scenario = "fit-od"\n[fit_od]\ndata = "{synth}"\n')
    assert cli.run(cfg, out=tmp_path / "b") == 0
    assert manifest_of(tmp_path / "b")["results"]["optical_depth"] == pytest.approx(55, rel=0.05)


def test_fit_g2_from_data(tmp_path):
    data = tmp_path / "pts.csv"
    from eitmem.coincidence import G2Model, g2_peak_model
    m = G2Model(1.0, 0.055, 0.43, 2.8).scaled_to(1.0, 5.8)
    xi = np.array([0.72, 1, 2, 3.5, 5, 8.7])
    g = g2_peak_model(m, xi)
    rows = "\n".join(f"{a:.17g},{b:.17g},{0.05 * b:.17g},{f:.17g}" for a, b, f in zip(xi, g, m.floor(xi)))
    data.write_text("xi,g2,sigma,floor\n" + rows + "\n")
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'scenario = "fit-g2"\n[fit_g2]\ndata = "{data}"\n')
    assert cli.run(cfg, out=tmp_path / "o") == 0
    res = manifest_of(tmp_path / "o")["results"]
    assert res["gamma_s"] == pytest.approx(0.055, rel=1e-3)


def test_missing_data_file(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('scenario = "fit-od"\n[fit_od]\ndata = "/nonexistent.csv"\n')
    assert cli.run(cfg, out=tmp_path / "o") == 2
    assert "config error: fit_od.data" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eitmem", "--config", str(CONFIGS / "fit-od.toml"),
                           "--out", str(tmp_path), "--seed", "5"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert manifest_of(tmp_path)["seed"] == 5
    bad = subprocess.run([sys.executable, "-m", "eitmem"], capture_output=True, text=True)
    assert bad.returncode != 0
