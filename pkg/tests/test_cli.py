import math
import os

import numpy as np
import pytest

from achns import diagnostics
from achns.cli import main

SMALL = """\
[domain]
n1 = 16
n2 = 16
[time]
dt = 0.002
t_end = 0.02
"""

TINY = """\
[domain]
n1 = 8
n2 = 8
[time]
dt = 0.004
t_end = 0.016
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return str(path)


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return str(path)


def _lines(capsys):
    return capsys.readouterr().out.splitlines()


# --- run -----------------------------------------------------------------

def test_run_small(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", small_cfg, "--output", str(out)])
    assert code == 0
    lines = _lines(capsys)
    assert any(l.startswith("steps: 10") for l in lines)
    assert any(l.startswith("final time: 0.02") for l in lines)
    assert (out / "energy.csv").exists()
    assert (out / "state_final.bin").exists()
    header = (out / "energy.csv").read_text().splitlines()[0]
    assert header.split(",")[:2] == ["t", "e_kin"]


def test_run_deterministic(small_cfg, tmp_path, capsys):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", small_cfg, "--output", str(out1)]) == 0
    first = capsys.readouterr().out
    assert main(["run", "--config", small_cfg, "--output", str(out2)]) == 0
    second = capsys.readouterr().out
    assert first.replace(str(out1), "@") == second.replace(str(out2), "@")
    assert (out1 / "energy.csv").read_bytes() == (out2 / "energy.csv").read_bytes()
    assert (out1 / "state_final.bin").read_bytes() == (out2 / "state_final.bin").read_bytes()


def test_run_snapshot_cadence(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL + "[output]\nsnapshots = all\ncadence = 5\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--output", str(out)]) == 0
    files = sorted(f for f in os.listdir(out) if f.endswith(".bin"))
    # emitted at steps 0, 5, 10
    assert files == ["state_000000.bin", "state_000001.bin", "state_000002.bin"]


def test_run_snapshots_none(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL + "[output]\nsnapshots = none\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--output", str(out)]) == 0
    assert not any(f.endswith(".bin") for f in os.listdir(out))


def test_run_missing_config(capsys):
    assert main(["run", "--config", "/definitely/not/here.cfg"]) == 1
    assert "io error" in capsys.readouterr().err


def test_run_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[potential]\nlambda1 = 1.0\nlambda2 = 0.5\neps = 0.9\n")
    assert main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "line 4" in err and "0.292893" in err


def test_run_unstable_dt(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[domain]\nn1 = 32\nn2 = 32\n[time]\ndt = 0.5\nt_end = 1.0\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "runtime error" in capsys.readouterr().err


# --- check-anisotropy ------------------------------------------------------

def test_check_anisotropy_default(capsys):
    assert main(["check-anisotropy"]) == 0
    out = capsys.readouterr().out
    assert "all hypotheses hold" in out
    assert "r =" in out


def test_check_anisotropy_indefinite(capsys):
    assert main(["check-anisotropy", "--m11", "1", "--m12", "2", "--m22", "1"]) == 1
    assert "FAILED" in capsys.readouterr().out


def test_check_anisotropy_fourfold(capsys):
    assert main(["check-anisotropy", "--beta", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "r = 1" in out and "R = 4" in out


def test_check_anisotropy_conflicting_flags(capsys):
    assert main(["check-anisotropy", "--beta", "0.5", "--m11", "1"]) == 1
    assert main(["check-anisotropy", "--m11", "1"]) == 1


# --- potential-table ---------------------------------------------------------

def test_potential_table(capsys):
    from achns.config import parse_config
    from achns.potential import f_eps, f_eps_prime, f_eps_second

    assert main(["potential-table", "--from", "-1.5", "--to", "1.5",
                 "--points", "7"]) == 0
    lines = _lines(capsys)
    assert lines[0] == "s,f_eps,f_eps_prime,f_eps_second"
    assert len(lines) == 8
    spec = parse_config("").spec
    for row in lines[1:]:
        s, f, fp, fpp = (float(tok) for tok in row.split(","))
        assert f == f_eps(spec, s)
        assert fp == f_eps_prime(spec, s)
        assert fpp == f_eps_second(spec, s)


def test_potential_table_bad_range(capsys):
    assert main(["potential-table", "--from", "1", "--to", "0",
                 "--points", "5"]) == 1
    assert main(["potential-table", "--from", "0", "--to", "1",
                 "--points", "1"]) == 1


# --- fixedpoint ------------------------------------------------------------

def test_fixedpoint_converges(tiny_cfg, capsys):
    code = main(["fixedpoint", "--config", tiny_cfg, "--t-tilde", "0.008",
                 "--tol", "1e-6"])
    lines = _lines(capsys)
    assert code == 0
    assert lines[0] == "iterate,distance,r_eps"
    rows = [l.split(",") for l in lines[1:-1]]
    dists = [float(r[1]) for r in rows]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert lines[-1].startswith("converged: yes")


def test_fixedpoint_nonconvergence_is_exit_2(tiny_cfg, capsys):
    code = main(["fixedpoint", "--config", tiny_cfg, "--t-tilde", "0.008",
                 "--tol", "1e-30", "--max-iter", "1"])
    assert code == 2
    assert _lines(capsys)[-1].startswith("converged: no")


def test_fixedpoint_bad_horizon(tiny_cfg, capsys):
    code = main(["fixedpoint", "--config", tiny_cfg, "--t-tilde", "0.005",
                 "--tol", "1e-6"])
    assert code == 1


# --- bihari ------------------------------------------------------------------

def test_bihari_exact(capsys):
    assert main(["bihari", "--c1", "1", "--g0", "0", "--y0", "1"]) == 0
    assert float(_lines(capsys)[0].split("=")[1]) == 1.0


def test_bihari_check(capsys):
    assert main(["bihari", "--c1", "0.7", "--g0", "0.3", "--y0", "2.0",
                 "--check", "4"]) == 0
    out = capsys.readouterr().out
    assert "check: pass (4 trials)" in out


def test_bihari_bad_args(capsys):
    assert main(["bihari", "--c1", "-1", "--g0", "0", "--y0", "1"]) == 1


# --- besov -------------------------------------------------------------------

def test_besov_on_run_output(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", small_cfg, "--output", str(out)]) == 0
    capsys.readouterr()
    csv = str(out / "energy.csv")
    assert main(["besov", csv, "--column", "e_total", "--p", "inf"]) == 0
    lines = _lines(capsys)
    semi = float(lines[0].split("=")[1])
    norm = float(lines[1].split("=")[1])

    data = np.genfromtxt(csv, delimiter=",", names=True)
    series = np.asarray(data["e_total"], float)
    assert semi == diagnostics.besov_seminorm(series, math.inf, 0.002)
    assert norm == diagnostics.besov_norm(series, math.inf, 0.002)


def test_besov_explicit_dt(tmp_path, capsys):
    csv = tmp_path / "series.csv"
    n = 64
    rows = ["value"] + [f"{i / n:.17g}" for i in range(n + 1)]
    csv.write_text("\n".join(rows) + "\n")
    assert main(["besov", str(csv), "--column", "value", "--p", "inf",
                 "--sample-dt", str(1.0 / n)]) == 0
    semi = float(_lines(capsys)[0].split("=")[1])
    assert semi == pytest.approx(1.0, rel=1e-12)


def test_besov_needs_dt_without_time_column(tmp_path, capsys):
    csv = tmp_path / "series.csv"
    csv.write_text("value\n1\n2\n3\n4\n5\n")
    assert main(["besov", str(csv), "--column", "value", "--p", "2"]) == 1
    assert "sample-dt" in capsys.readouterr().err


def test_besov_nonuniform_time(tmp_path, capsys):
    csv = tmp_path / "series.csv"
    csv.write_text("t,value\n0,1\n0.1,2\n0.3,3\n0.4,4\n")
    assert main(["besov", str(csv), "--column", "value", "--p", "2"]) == 1
    assert "uniform" in capsys.readouterr().err


def test_besov_missing_column(tmp_path, capsys):
    csv = tmp_path / "series.csv"
    csv.write_text("t,value\n0,1\n1,2\n2,3\n3,4\n")
    assert main(["besov", str(csv), "--column", "nope", "--p", "2"]) == 1
    assert "available" in capsys.readouterr().err


# --- sweep -------------------------------------------------------------------

def test_sweep_modes(tiny_cfg, capsys):
    assert main(["sweep", "--config", tiny_cfg, "--modes", "8,16"]) == 0
    lines = _lines(capsys)
    assert lines[0] == "reference: n=16"
    assert lines[1].startswith("n=8 ")
    total = float(lines[1].split("diff_total=")[1])
    assert total > 0.0


def test_sweep_eps(tiny_cfg, capsys):
    assert main(["sweep", "--config", tiny_cfg, "--eps", "0.2,0.05"]) == 0
    lines = _lines(capsys)
    assert lines[0].startswith("eps=0.2 ")
    assert lines[1].startswith("eps=0.05 ")
    assert lines[2].startswith("e0_unregularized")


def test_sweep_requires_exactly_one_mode(tiny_cfg, capsys):
    assert main(["sweep", "--config", tiny_cfg]) == 1
    assert main(["sweep", "--config", tiny_cfg, "--modes", "8,16",
                 "--eps", "0.1,0.2"]) == 1
    assert main(["sweep", "--config", tiny_cfg, "--modes", "8"]) == 1


# --- parser ------------------------------------------------------------------

def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "run" in capsys.readouterr().out


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 1
