import csv
import math

import pytest

from swarmkin import cli, meanfield
from swarmkin.core import ModelParams

CFG = "gamma0 = 0.3\nb = 1\nn_agents = 20\nkernel = tophat:0.2\nseed = 7\n"


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text(CFG)
    return str(path)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_abm_writes_series_and_histogram(cfg, tmp_path, capsys):
    code = cli.main(["--config", cfg, "--out-dir", str(tmp_path), "simulate-abm", "--steps", "500", "--record-u", "5", "--out", "u.csv", "--hist", "h.csv"])
    assert code == 0
    rows = _rows(tmp_path / "u.csv")
    assert rows[0] == ["time", "u"] and len(rows) == 101
    hist = _rows(tmp_path / "h.csv")
    assert hist[0] == ["bin_center", "probability_mass"] and len(hist) == 22
    assert sum(float(r[1]) for r in hist[1:]) == pytest.approx(1.0)
    assert "transitions=" in capsys.readouterr().out


def test_outputs_are_not_overwritten_without_force(cfg, tmp_path):
    args = ["simulate-abm", "--config", cfg, "--out-dir", str(tmp_path), "--steps", "10", "--out", "u.csv"]
    assert cli.main(args) == 0
    assert cli.main(args) == 2
    assert cli.main(args + ["--force"]) == 0


def test_simulate_abm_is_byte_reproducible(cfg, tmp_path):
    for name in ("a.csv", "b.csv"):
        cli.main(["simulate-abm", "--config", cfg, "--out-dir", str(tmp_path), "--steps", "300", "--out", name])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_analyze_fp(cfg, tmp_path):
    assert cli.main(["analyze-fp", "--config", cfg, "--out-dir", str(tmp_path), "--out", "fp.csv"]) == 0
    vals = dict(_rows(tmp_path / "fp.csv")[1:])
    assert vals["regime"] == "small_noise"
    assert float(vals["u_s"]) == pytest.approx(math.sqrt(0.8))
    assert float(vals["curvature_at_zero"]) == pytest.approx(-12.3077, abs=1e-4)
    assert float(vals["tau_exact"]) == pytest.approx(meanfield.master_equation_mfpt(ModelParams(0.3, 1, 20), 1, 19))
    dens = _rows(tmp_path / "fp_density.csv")
    assert dens[0] == ["u", "density"] and len(dens) == 2002


def test_solve_kinetic(cfg, tmp_path):
    code = cli.main(["solve-kinetic", "--config", cfg, "--out-dir", str(tmp_path), "--closure", "dirac", "--grid", "50", "--T", "1", "--snapshots", "0.5,1", "--out-prefix", "k"])
    assert code == 0
    snap = _rows(tmp_path / "k_t1.csv")
    assert snap[0] == ["x", "p_plus", "p_minus", "rho", "j", "u"] and len(snap) == 51
    diag = _rows(tmp_path / "k_diagnostics.csv")
    assert diag[0] == ["time", "mass", "l2_j", "l2_rho"]
    assert float(diag[-1][0]) == pytest.approx(1.0)


def test_solve_kinetic_reports_cfl_violation(cfg, tmp_path, capsys):
    code = cli.main(["solve-kinetic", "--config", cfg, "--out-dir", str(tmp_path), "--grid", "50", "--T", "1", "--dt", "0.05", "--out-prefix", "k"])
    assert code == 2 and "CFL" in capsys.readouterr().err


def test_chaos_check(tmp_path):
    code = cli.main(["chaos-check", "--out-dir", str(tmp_path), "--mode", "shrink:1", "--population", "uniform:0.4", "--N-list", "100,300", "--replicates", "500", "--out", "c.csv"])
    assert code == 0
    rows = _rows(tmp_path / "c.csv")
    assert rows[0] == ["N", "estimate", "stderr", "limit_value"] and len(rows) == 3
    assert float(rows[1][3]) == pytest.approx(0.4 * (1 - math.exp(-1)))
    assert cli.main(["chaos-check", "--out-dir", str(tmp_path), "--mode", "bogus", "--out", "d.csv"]) == 2


def test_sweep_slope_and_errors(cfg, tmp_path, capsys):
    code = cli.main(["sweep", "--config", cfg, "--out-dir", str(tmp_path), "--axis", "n_agents", "--values", "20,30,40,50,60", "--metrics", "ln_kramers", "--out", "s.csv"])
    assert code == 0
    rows = _rows(tmp_path / "s.csv")
    assert rows[0] == ["axis", "axis_value", "metric", "value"] and len(rows) == 6
    out = capsys.readouterr().out
    slope, expected = (float(t.split()[0].rstrip(")")) for t in out.split(": ")[1].split("exponent "))
    assert slope == pytest.approx(expected, rel=0.05)
    assert cli.main(["sweep", "--config", cfg, "--out-dir", str(tmp_path), "--axis", "speed", "--values", "1", "--out", "x.csv"]) == 2
    assert "valid axes" in capsys.readouterr().err
    assert cli.main(["sweep", "--config", cfg, "--out-dir", str(tmp_path), "--axis", "b", "--values", "", "--out", "y.csv"]) == 2


def test_sweep_gamma0_at_fixed_ratio():
    base = ModelParams(0.3, 1.0, 20)
    rows = cli.sweep(base, "gamma0", [0.1, 0.3, 0.6], ["kramers_ratio"], fixed_ratio=True)
    for _, g, _, ratio in rows:
        assert ratio == pytest.approx(1.0 / g, rel=1e-12)


def test_sweep_cell_seeds_are_deterministic():
    base = ModelParams(0.3, 1.0, 8)
    a = cli.sweep(base, "gamma0", [0.3, 0.4], ["abm_switching_time"], steps=20_000)
    b = cli.sweep(base, "gamma0", [0.3, 0.4], ["abm_switching_time"], steps=20_000)
    assert a == b


def test_recipe_reproducible_and_exit_status(tmp_path):
    args = ["recipe", "fig1_transition", "--set", "steps=2000"]
    assert cli.main(args + ["--out-dir", str(tmp_path / "a")]) in (0, 1)
    assert cli.main(args + ["--out-dir", str(tmp_path / "b")]) in (0, 1)
    for name in ("histogram_N12.csv", "u_series_N5.csv", "summary.txt"):
        assert (tmp_path / "a" / "fig1_transition" / name).read_bytes() == (tmp_path / "b" / "fig1_transition" / name).read_bytes()
    assert cli.main(args + ["--out-dir", str(tmp_path / "a")]) == 2


def test_recipe_passes_exit_zero(tmp_path):
    assert cli.main(["recipe", "fig3_nonlocal_longtime", "--out-dir", str(tmp_path), "--set", "grid=100"]) == 0
    summary = (tmp_path / "fig3_nonlocal_longtime" / "summary.txt").read_text()
    assert summary.count("PASS") == 3


def test_recipe_rejects_unknown_override(tmp_path):
    assert cli.main(["recipe", "fig3_nonlocal_longtime", "--out-dir", str(tmp_path), "--set", "colour=red"]) == 2


def test_missing_config_is_an_error(tmp_path):
    assert cli.main(["analyze-fp", "--out-dir", str(tmp_path), "--out", "x.csv"]) == 2
