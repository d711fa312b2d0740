# -*- coding: utf-8 -*-
from __future__ import annotations

import csv
import json
import logging

import numpy as np
import pytest

import axisym_runner
import experiments
from errors import AssemblyError
from postprocess import relative_linf_error
from run_config import RunConfig


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_defaults_command_prints_config_file(capsys):
    assert axisym_runner.main(["defaults"]) == axisym_runner.EXIT_OK
    out = capsys.readouterr().out
    assert "n_panels = 10" in out
    assert "fourier_modes = 100" in out
    assert "x0 = auto" in out


def test_solve_small_sphere(small_config):
    result = experiments.run_solve(small_config)
    assert result.error < 1e-2
    assert result.sigma_grid.shape == (small_config.n_panels * 10, result.problem.m_theta)
    assert set(experiments.PHASES) <= set(result.timings)
    assert 0 < result.min_rcond <= 1


def test_solve_is_reproducible(small_config):
    a = experiments.run_solve(small_config)
    b = experiments.run_solve(small_config)
    np.testing.assert_array_equal(a.u_num, b.u_num)
    assert a.error == b.error


def test_solve_command_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "solve"
    code = axisym_runner.main(["solve", "--set", "n_panels=4", "--set", "fourier_modes=16",
                               "--set", "eval_count=6", "--output-dir", str(out)])
    assert code == axisym_runner.EXIT_OK
    assert "相対 l∞ 誤差" in capsys.readouterr().out

    schema, rows = read_csv(out / "sigma_grid.csv")
    assert schema == "# schema: sigma_grid v1"
    assert len(rows) == 40 * int(rows[-1]["theta_index"]) + 40
    schema, rows = read_csv(out / "potentials.csv")
    assert schema == "# schema: potentials v1"
    assert len(rows) == 6

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["schema"] == "axisym.summary"
    assert summary["schema_version"] == 1
    assert set(summary["timings"]) == set(experiments.PHASES)
    assert summary["n_modes"] == 8
    assert summary["dof"] == 40


def test_missing_curve_file_is_a_configuration_error(tmp_path, caplog):
    missing = tmp_path / "nowhere" / "curve.txt"
    with caplog.at_level(logging.ERROR):
        code = axisym_runner.main(["solve", "--set", f"curve={missing}", "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_CONFIG
    assert "curve.txt" in caplog.text


@pytest.mark.parametrize("override", ["no_such_key=1", "n_panels=ten", "problem=both"])
def test_bad_settings_exit_with_config_code(tmp_path, override):
    assert axisym_runner.main(["solve", "--set", override, "--output-dir", str(tmp_path)]) == axisym_runner.EXIT_CONFIG


def test_x0_outside_curve_is_rejected(tmp_path):
    code = axisym_runner.main(["solve", "--set", "problem=exterior", "--set", "x0=0.0,3.0",
                               "--set", "n_panels=4", "--set", "fourier_modes=8",
                               "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch, caplog):
    def broken(config):
        raise AssemblyError("テスト用の失敗")

    monkeypatch.setattr(experiments, "run_solve", broken)
    with caplog.at_level(logging.ERROR):
        code = axisym_runner.main(["solve", "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_NUMERICAL
    assert "AssemblyError" in caplog.text


def test_log_file_receives_errors(tmp_path):
    log = tmp_path / "logs" / "run.log"
    code = axisym_runner.main(["solve", "--set", "problem=both", "--log-file", str(log),
                               "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_CONFIG
    assert "problem" in log.read_text(encoding="utf-8")


def test_convergence_single_cell(tmp_path):
    code = axisym_runner.main(["convergence", "--panels", "4", "--modes", "12",
                               "--set", "eval_count=6", "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_OK
    schema, rows = read_csv(tmp_path / "convergence.csv")
    assert schema == "# schema: convergence v1"
    assert len(rows) == 1
    assert rows[0]["n_panels"] == "4" and rows[0]["fourier_modes"] == "12"
    schema, table = read_csv(tmp_path / "convergence_table.csv")
    assert list(table[0]) == ["n_panels", "12"]


def test_quad_check_command(tmp_path):
    assert axisym_runner.main(["quad-check", "--output-dir", str(tmp_path)]) == axisym_runner.EXIT_OK
    schema, rows = read_csv(tmp_path / "quad_check.csv")
    assert schema == "# schema: quad_check v1"
    assert {r["rule"].split("(")[0] for r in rows} == {"gauss10", "singular20", "nearby-graded"}
    assert sum(r["rule"].startswith("singular20") for r in rows) == 10
    assert max(float(r["residual"]) for r in rows) < 1e-11


def test_conditioning_command(tmp_path):
    code = axisym_runner.main(["conditioning", "--set", "n_panels=4", "--set", "fourier_modes=10",
                               "--output-dir", str(tmp_path)])
    assert code == axisym_runner.EXIT_OK
    _, rows = read_csv(tmp_path / "conditioning.csv")
    assert [int(r["n"]) for r in rows] == list(range(6))


def test_exterior_completion_removes_the_null_space(small_config):
    with_completion = experiments.run_conditioning(small_config.replace(problem="exterior"))
    without = experiments.run_conditioning(small_config.replace(problem="exterior", exterior_completion=False))
    assert with_completion[0]["cond"] < 100
    assert without[0]["cond"] > 1e10


def test_exterior_solve_small_sphere(small_config):
    result = experiments.run_solve(small_config.replace(problem="exterior"))
    assert result.error < 1e-2


def test_loglog_slope():
    x = [5, 10, 20, 40]
    assert experiments.loglog_slope(x, [v ** 3 for v in x]) == pytest.approx(3.0)
    assert np.isnan(experiments.loglog_slope([5], [1.0]))


def test_timing_rejects_unknown_sweep(small_config):
    with pytest.raises(ValueError, match="sweep"):
        experiments.run_timing(small_config, "threads", [1])


# ──────────────────────────────────────────────
# 大きな格子（-m slow）
# ──────────────────────────────────────────────

@pytest.mark.slow
def test_sphere_reaches_high_accuracy(tmp_path):
    result = experiments.run_solve(RunConfig(n_panels=10, fourier_modes=100, output_dir=str(tmp_path)))
    assert result.error <= 1e-10


@pytest.mark.slow
def test_error_table_spans_orders_of_magnitude(tmp_path):
    rows = experiments.run_convergence(RunConfig(output_dir=str(tmp_path)), [5, 10], [25, 100])
    _, _, cells = experiments.convergence_table(rows)
    assert cells[(5, 25)] / cells[(10, 100)] >= 1e6
    assert cells[(10, 100)] <= cells[(5, 100)]


@pytest.mark.slow
def test_matrix_time_scales_quadratically_in_panels(tmp_path):
    _, summary = experiments.run_timing(RunConfig(fourier_modes=50, output_dir=str(tmp_path)),
                                        "panels", [5, 10, 20, 40])
    assert 1.7 <= summary["slopes"]["T_mat"] <= 2.3
    assert summary["slopes"]["T_inv"] >= 1.5


@pytest.mark.slow
def test_matrix_time_scales_linearly_in_modes(tmp_path):
    _, summary = experiments.run_timing(RunConfig(n_panels=10, output_dir=str(tmp_path)),
                                        "modes", [50, 100, 200, 400])
    assert 0.7 <= summary["slopes"]["T_mat"] <= 1.3


@pytest.mark.slow
@pytest.mark.parametrize("curve, problem", [
    ("wavy_block", "interior"),
    ("starfish_torus", "interior"),
    ("starfish_torus", "exterior"),
])
def test_self_convergence_on_harder_curves(tmp_path, curve, problem):
    base = RunConfig(curve=curve, problem=problem, fourier_modes=200, output_dir=str(tmp_path))
    coarse = experiments.run_solve(base.replace(n_panels=40))
    fine = experiments.run_solve(base.replace(n_panels=80))
    assert relative_linf_error(coarse.u_num, fine.u_num) <= 1e-8
    assert fine.error < 1e-4
