import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bathdisc.cli import main
from bathdisc.evolve import tmax_predict
from bathdisc.io import read_bath, read_chain, read_series

FLAT = "density: {family: flat, height: 0.5, support: [-1, 1]}\n"


def _run(tmp_path, command, text, *extra):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_discretize_flat_two_modes(tmp_path):
    code, out = _run(tmp_path, "discretize", FLAT + "method: [bsdo, equal_weight]\nN_b: 2\n")
    assert code == 0
    b = read_bath(out / "bath_bsdo_N2.txt")
    assert np.allclose(b.energies, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(b.weights, [0.5, 0.5], atol=1e-15)
    chain = read_chain(out / "chain_bsdo_N2.txt")
    assert chain.v_tot == pytest.approx(1.0) and chain.n_sites == 2
    e = read_bath(out / "bath_equal_weight_N2.txt")
    assert e.weights[0] == e.weights[1]
    m = _manifest(out)
    assert m["command"] == "discretize" and len(m["config_sha256"]) == 64
    assert sorted(m["files"]) == m["files"] and "bath_bsdo_N2.txt" in m["files"]


def test_evolve_isolated_level(tmp_path):
    text = FLAT + "method: bsdo\nN_b: 0\nmodel: {epsilon0: 0.3}\ntime: {dt: 0.05, t_end: 2}\n" \
                  "error: {N_ref: 2000}\n"
    code, out = _run(tmp_path, "evolve", text)
    assert code == 0
    p = read_series(out / "population_bsdo_N0.csv")
    assert np.allclose(p.values, 1.0, rtol=0, atol=1e-15)
    lam = read_series(out / "lambda_bsdo_N0.csv")
    assert np.all(lam.values == 0)


def test_evolve_star_and_chain_agree(tmp_path):
    base = FLAT + "method: bsdo\nN_b: 10\ntime: {dt: 0.05, t_end: 3}\nerror: {N_ref: 2000}\n"
    pops = []
    for geom in ("star", "chain"):
        d = tmp_path / geom
        d.mkdir()
        code, out = _run(d, "evolve", base + f"model: {{epsilon0: 0.2, geometry: {geom}}}\n")
        assert code == 0
        pops.append(read_series(out / "population_bsdo_N10.csv").values)
        m = _manifest(out)
        assert m["reference"]["certificate"] < 1e-6
        assert m["t_max_predicted"]["system"] == tmax_predict(10, -1, 1, "system")
    assert np.max(np.abs(pops[0] - pops[1])) < 1e-10


def test_tmax_scan_summary(tmp_path):
    text = FLAT + "method: [bsdo, linear]\nN_b: [4, 8]\nmodel: {epsilon0: 0.1}\n" \
                  "time: {dt: 0.05, t_end: 6}\nerror: {N_ref: 4000}\n"
    code, out = _run(tmp_path, "tmax-scan", text, "--deterministic")
    assert code == 0
    lines = [l for l in (out / "tmax_summary.csv").read_text().splitlines()
             if not l.startswith("#")]
    assert lines[0] == "method,N_b,t_max_empirical,t_max_predicted,max_error_before_tmax"
    assert [l.split(",")[:2] for l in lines[1:]] == [["bsdo", "4"], ["bsdo", "8"],
                                                     ["linear", "4"], ["linear", "8"]]


def test_mastereq_zero_temperature(tmp_path):
    text = ("density: {family: caldeira_leggett, alpha: 0.01, s: 1.0, omega_c: 5.0, "
            "omega_max: 20.0}\nmethod: bsdo\nN_b: 30\nmodel: {omega_s: 1.0}\n"
            "time: {dt: 0.01, t_end: 2}\nmastereq: {beta: inf}\n")
    code, out = _run(tmp_path, "mastereq", text)
    assert code == 0
    for tag in ("discrete", "continuous"):
        assert np.all(read_series(out / f"alpha2_{tag}.csv").values == 0)
        assert read_series(out / f"population_{tag}.csv").values[0] == 1.0
    m = _manifest(out)
    assert m["trace_error"] < 1e-9 and m["step_defect"] < 1e-6
    assert m["population_dev_before_tmax"] < 1e-3


def test_manybody_atomic(tmp_path):
    text = "N_b: 0\nmodel: {epsilon0: 0.0, U: 4.0}\ntime: {dt: 0.05, t_end: 3}\n"
    code, out = _run(tmp_path, "manybody", text)
    assert code == 0
    g = read_series(out / "greens_U4_N0.csv")
    assert np.allclose(np.abs(g.values), 1.0, atol=1e-12)
    assert _manifest(out)["ground_energy"] == pytest.approx(-1.0)


def test_manybody_u0_matches_single_particle(tmp_path):
    text = FLAT + "method: bsdo\nN_b: 4\nmodel: {U: 0.0}\ntime: {dt: 0.05, t_end: 3}\n"
    code, out = _run(tmp_path, "manybody", text)
    assert code == 0
    assert _manifest(out)["single_particle_deviation"] < 1e-8


def test_compare(tmp_path):
    text = FLAT + "method: bsdo\nN_b: 4\nmodel: {U: 0.0}\ntime: {dt: 0.1, t_end: 1}\n"
    code, out = _run(tmp_path, "manybody", text)
    g = out / "greens_U0_N4.csv"
    cfg = tmp_path / "cmp.yaml"
    cfg.write_text(f"compare: {{a: {g}, b: {g}, label_a: x, label_b: y}}\n")
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "cmp")]) == 0
    lines = (tmp_path / "cmp" / "compare.csv").read_text().splitlines()
    rows = [l for l in lines if not l.startswith("#")]
    assert rows[0] == "t,x,y,ratio"
    assert all(float(r.split(",")[3]) == 1.0 for r in rows[1:])


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "discretize", FLAT + "modle: {}\n")
    assert code == 2
    assert "modle" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path):
    text = ("density: {family: caldeira_leggett, alpha: 1.0, s: 0.5, omega_c: 10.0, "
            "omega_max: 50.0}\nmethod: bsdo\nN_b: 10\nmodel: {epsilon0: 0.5}\n"
            "time: {dt: 0.05, t_end: 5}\nerror: {N_ref: 40}\n")
    code, _ = _run(tmp_path, "evolve", text)
    assert code == 3


def test_rerun_is_byte_identical(tmp_path):
    text = FLAT + "method: [bsdo, linear]\nN_b: [3, 5]\nmodel: {epsilon0: 0.1}\n" \
                  "time: {dt: 0.05, t_end: 4}\nerror: {N_ref: 2000}\n"
    outs = []
    for i, extra in enumerate(([], ["--deterministic"])):
        d = tmp_path / str(i)
        d.mkdir()
        code, out = _run(d, "tmax-scan", text, *extra)
        assert code == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir() if p.name != "manifest.json")
    assert names == sorted(p.name for p in outs[1].iterdir() if p.name != "manifest.json")
    assert "tmax_summary.csv" in names
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    m0, m1 = _manifest(outs[0]), _manifest(outs[1])
    m0.pop("deterministic"), m1.pop("deterministic")
    assert m0 == m1


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(FLAT + "N_b: 2\n")
    res = subprocess.run([sys.executable, "-m", "bathdisc", "discretize", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "bath_bsdo_N2.txt").exists()
