import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from funcoord import acceptance
from funcoord.cli import EXTRA_TOLERANCES, RUNNERS, all_tolerances, main

FAST = ["dual-metric", "eigen", "transform-check", "embed", "geodesic"]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


@pytest.mark.parametrize("command", FAST)
def test_default_runs_pass(command, tmp_path, capsys):
    assert main([command, "--out", str(tmp_path)]) == 0
    stem = command.replace("-", "_")
    rows = read_csv(tmp_path / f"{stem}.csv")
    assert rows
    summary = json.loads((tmp_path / f"{stem}.json").read_text())
    assert summary["experiment"] == command
    assert summary["passed"] is True
    assert summary["seed"] == 0
    assert "[PASS]" in capsys.readouterr().out


def test_eigen_derivative_spectrum(tmp_path):
    assert main(["eigen", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "eigen.csv")
    lam = np.array([float(r["lambda_re"]) for r in rows])
    assert len(rows) == 21
    np.testing.assert_allclose(lam, np.arange(-10, 11), atol=1e-8)
    assert all(float(r["residual"]) < 1e-8 for r in rows)


def test_eigen_position(tmp_path):
    cfg = write_cfg(tmp_path, "[eigen]\noperator = position\nmax_abs = 1\n[grid]\nlo = -1\nhi = 1\npoints = 9\n")
    assert main(["eigen", "--config", cfg, "--out", str(tmp_path)]) == 0
    lam = [float(r["lambda_re"]) for r in read_csv(tmp_path / "eigen.csv")]
    np.testing.assert_allclose(lam, np.linspace(-1, 1, 9), atol=1e-15)


def test_geodesic_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["geodesic", "--seed", "7", "--out", str(a)]) == 0
    assert main(["geodesic", "--seed", "7", "--out", str(b)]) == 0
    assert (a / "geodesic.csv").read_bytes() == (b / "geodesic.csv").read_bytes()
    assert main(["geodesic", "--seed", "8", "--out", str(b)]) == 0
    assert (a / "geodesic.csv").read_bytes() != (b / "geodesic.csv").read_bytes()


def test_geodesic_columns(tmp_path):
    main(["geodesic", "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "geodesic.csv")
    assert list(rows[0]) == ["tau", "norm_minus_one", "tangency", "residual", "flow_gap"]


def test_float_format(tmp_path):
    main(["dual-metric", "--out", str(tmp_path)])
    text = (tmp_path / "dual_metric.csv").read_text()
    assert "\r" not in text
    # 17 significant digits round-trip exactly
    for row in read_csv(tmp_path / "dual_metric.csv"):
        v = row["normalized"]
        assert repr(float(v)) == repr(float(f"{float(v):.17g}"))


def test_unknown_tolerance(tmp_path, capsys):
    assert main(["geodesic", "--tol", "nope=1", "--out", str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err


def test_bad_tolerance_syntax(tmp_path):
    assert main(["geodesic", "--tol", "flow_gap", "--out", str(tmp_path)]) == 2


def test_override_echoed_and_enforced(tmp_path):
    assert main(["geodesic", "--tol", "flow_gap=1e-20", "--out", str(tmp_path)]) == 1
    summary = json.loads((tmp_path / "geodesic.json").read_text())
    assert summary["overrides"] == {"flow_gap": 1e-20}
    assert summary["tolerances"]["flow_gap"] == 1e-20
    assert summary["passed"] is False


def test_config_tolerance_override(tmp_path):
    cfg = write_cfg(tmp_path, "[tolerances]\nflow_gap = 1e-3\n")
    assert main(["geodesic", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "geodesic.json").read_text())["overrides"] == {"flow_gap": 1e-3}


def test_defaults_equal_module_tolerances():
    tol = all_tolerances()
    for k, v in acceptance.TOLERANCES.items():
        assert tol[k] == v
    for k, v in EXTRA_TOLERANCES.items():
        assert tol[k] == v


def test_first_order_fourier(tmp_path):
    cfg = write_cfg(tmp_path, "[run]\ncommand = transform-check\n[transform]\nmode = first-order\n"
                              "a = 1\nb = i*y\ng = 1\n")
    assert main(["transform-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "transform_check.csv")}
    assert float(rows["residual"]) < 1e-10
    assert float(rows["condition"]) == pytest.approx(1.0)
    assert rows["invertible"] == "true"


def test_first_order_constant_kernel_not_invertible(tmp_path):
    cfg = write_cfg(tmp_path, "[transform]\nmode = first-order\na = 1\nb = 0\ng = 1\n")
    assert main(["transform-check", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "transform_check.csv")}
    assert rows["invertible"] == "false"


def test_first_order_vanishing_coefficient(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[transform]\nmode = first-order\na = x\nb = i*y\ng = 0\n")
    assert main(["transform-check", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "vanishes" in capsys.readouterr().err


def test_config_command_mismatch(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[run]\ncommand = eigen\n")
    assert main(["geodesic", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "eigen" in capsys.readouterr().err


def test_config_error_position(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[run]\nfoo = 1\n")
    assert main(["geodesic", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "(line 2)" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["geodesic", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]) == 2


def test_embed_minkowski(tmp_path):
    cfg = write_cfg(tmp_path, "[kernel]\nfamily = minkowski_gauss\n[grid]\nsignature = 1 -1\n"
                              "[path]\na = t, t\nt0 = 0\nt1 = 1\nsteps = 11\n")
    assert main(["embed", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "embed.csv")
    assert list(rows[0]) == ["t", "a1", "a2", "q"]
    assert max(abs(float(r["q"])) for r in rows) < 1e-10


def test_explicit_matrix(tmp_path):
    cfg = write_cfg(tmp_path, "[geodesic]\nmatrix = 1 0; 0 2\nphi0 = e1\n")
    assert main(["geodesic", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_every_runner_has_subcommand():
    assert set(RUNNERS) == {"dual-metric", "eigen", "transform-check", "embed", "geodesic", "repro"}


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "funcoord", "eigen", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "[PASS]" in proc.stdout
