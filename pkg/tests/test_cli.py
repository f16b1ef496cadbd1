import json
import math

import pytest

from lenslab.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_scatter_diameter(tmp_path, capsys):
    rc = run_cli("scatter", "--spec", "flat-d2s1",
                 "--entry", "1,0,0", "--dir", "-1,0,0")
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "exited"
    assert out["travel_time"] == pytest.approx(2.0, abs=1e-9)
    assert out["exit"]["point"] == pytest.approx([-1.0, 0.0, 0.0], abs=1e-9)


def test_scatter_oracle_route(capsys):
    rc = run_cli("scatter", "--spec", "flat-d2s1", "--route", "oracle",
                 "--entry", "1,0,0", "--dir", "-0.70710678118,0,0.70710678118")
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["travel_time"] == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_lens_and_compare_tables(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path, spec in ((a, "flat-d2s1"), (b, "perturbed-d2s1")):
        rc = run_cli("lens", "--spec", spec, "--grid", "5,4,5",
                     "--route", "ode", "--out", str(path))
        assert rc == 0
    capsys.readouterr()
    cmp_path = tmp_path / "cmp.json"
    rc = run_cli("compare", "--table-a", str(a), "--table-b", str(b),
                 "--out", str(cmp_path))
    assert rc == 0
    rep = json.loads(cmp_path.read_text())
    assert rep["n_records"] == 100
    assert rep["max_deviation"] > 0.0  # the perturbation is detectable


def test_compare_family_mode(tmp_path):
    out = tmp_path / "family.json"
    rc = run_cli("compare", "--family", "bump", "--shifts", "-0.5,0.25,0.5",
                 "--angles", "12", "--route", "quadrature",
                 "--out", str(out), "--plot")
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["max_deviation"] < 1e-9
    assert (tmp_path / "family.json.png").exists()


def test_clairaut_family_csv(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    rc = run_cli("clairaut-family", "--shifts", "-0.5,0,0.5", "--angles", "6",
                 "--out", str(out))
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "shift,phi,delta_alpha,travel_time,exit_angle"
    assert len(lines) == 1 + 3 * 6
    summary = json.loads((tmp_path / "scan.csv.summary.json").read_text())
    assert summary["max_deviation"] < 1e-9


def test_volume_json(tmp_path):
    out = tmp_path / "vol.json"
    rc = run_cli("volume", "--spec", "flat-d2s1", "--samples", "50000",
                 "--seed", "4", "--out", str(out))
    assert rc == 0
    est = json.loads(out.read_text())
    truth = 2 * math.pi ** 2
    assert abs(est["volume"] - truth) < 0.05 * truth
    assert est["reference_nontrapped_volume"] == pytest.approx(truth)


def test_trapped_ladder_outputs(tmp_path):
    out = tmp_path / "trap.json"
    rc = run_cli("trapped", "--spec", "flat-d2s1", "--budgets", "100,1000",
                 "--samples", "50000", "--out", str(out), "--plot")
    assert rc == 0
    ladder = json.loads(out.read_text())["ladder"]
    assert len(ladder) == 2
    assert ladder[0]["fraction"] >= ladder[1]["fraction"]
    assert "exact_tail" in ladder[0]
    assert (tmp_path / "trap.csv").exists()
    assert (tmp_path / "trap.json.png").exists()


def test_scatter_trajectory_dump(tmp_path, capsys):
    traj = tmp_path / "traj.csv"
    rc = run_cli("scatter", "--spec", "bump-cylinder",
                 "--entry", "-1,0", "--dir", "0.8,0.6",
                 "--trajectory", str(traj))
    assert rc == 0
    lines = traj.read_text().splitlines()
    assert lines[0] == "elapsed,t,alpha,dt,dalpha"
    assert len(lines) > 10
    first = [float(x) for x in lines[1].split(",")]
    assert first == pytest.approx([0.0, -1.0, 0.0, 0.8, 0.6])
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "exited"


def test_busemann_value(capsys):
    rc = run_cli("busemann", "--spec", "flat-d2s1", "--base", "0,0,0",
                 "--dir", "1,0,0", "--p", "0,1.3,0", "--t", "13")
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(math.hypot(1.3, 13.0) - 13.0, abs=1e-12)


def test_config_file_flow(tmp_path, capsys):
    cfg = tmp_path / "bump.cfg"
    cfg.write_text("kind = surface_of_revolution\n"
                   "bump.amplitude = 0.05\n"
                   "bump.epsilon = 0.2\n"
                   "bump.shift = 0.25\n")
    rc = run_cli("scatter", "--config", str(cfg),
                 "--entry", "-1,0", "--dir", "0.8,0.6")
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "exited"


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("kind = flat_product\nwhat\n")
    rc = run_cli("scatter", "--config", str(cfg),
                 "--entry", "1,0,0", "--dir", "-1,0,0")
    assert rc == 1
    assert "line 2" in capsys.readouterr().err


def test_missing_spec_is_an_error(capsys):
    rc = run_cli("scatter", "--entry", "1,0,0", "--dir", "-1,0,0")
    assert rc == 1


def test_format_csv_outputs(tmp_path, capsys):
    rc = run_cli("scatter", "--spec", "flat-d2s1", "--format", "csv",
                 "--entry", "1,0,0", "--dir", "-1,0,0",
                 "--out", str(tmp_path / "rec.csv"))
    assert rc == 0
    lines = (tmp_path / "rec.csv").read_text().splitlines()
    assert lines[0].startswith("entry_u1,")
    assert len(lines) == 2

    rc = run_cli("volume", "--spec", "flat-d2s1", "--samples", "20000",
                 "--format", "csv")
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "volume,stderr,n_samples,censored_fraction,budget,seed"
    assert abs(float(out[1].split(",")[0]) - 2 * math.pi ** 2) < 0.5

    rc = run_cli("trapped", "--spec", "flat-d2s1", "--budgets", "100,1000",
                 "--samples", "20000", "--format", "csv")
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("budget,fraction,stderr")
    assert len(out) == 3


def test_reproducible_outputs(tmp_path):
    out1 = tmp_path / "v1.json"
    out2 = tmp_path / "v2.json"
    for out in (out1, out2):
        rc = run_cli("volume", "--spec", "bump-cylinder", "--samples", "20000",
                     "--seed", "7", "--out", str(out))
        assert rc == 0
    assert out1.read_bytes() == out2.read_bytes()

    l1 = tmp_path / "l1.csv"
    l2 = tmp_path / "l2.csv"
    for out, workers in ((l1, "1"), (l2, "2")):
        rc = run_cli("lens", "--spec", "flat-d2s1", "--grid", "5,5,4",
                     "--workers", workers, "--out", str(out))
        assert rc == 0
    assert l1.read_bytes() == l2.read_bytes()
