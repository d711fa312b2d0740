# -*- coding: utf-8 -*-
"""実験の組み立て: solve / convergence / timing / conditioning / quad-check。

各実験は結果オブジェクトか行のリストを返し、書き出しは write_* が受け持つ。
CSV は先頭 1 行目が `# schema: <name> v<k>`、2 行目がヘッダ。
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from assembly import build_modal_systems
from errors import ConfigurationError
from geometry import (
    Discretization,
    build_discretization,
    contains_point,
    curve_from_spec,
    interior_point,
)
from modal_kernels import BIE_SCALE, LaplaceKernel
from postprocess import (
    ChargeSet,
    EvaluationSet,
    boundary_data,
    eval_double_layer_potential,
    make_charges,
    make_targets,
    point_charge_potential,
    relative_linf_error,
)
from quadrature import (
    NEARBY_DECADES,
    RELATIONS,
    adaptive_integrate,
    gauss_rule,
    near_field_rule,
    nearby_rule,
    singular_rule,
    table_checksum,
)
from run_config import RunConfig
from solver import (
    conditioning_table,
    default_theta_count,
    factorize,
    fourier_analyze,
    fourier_synthesize,
    select_truncation,
    solve_all,
)

logger = logging.getLogger(__name__)

PHASES = ("T_setup", "T_mat", "T_inv", "T_fft", "T_apply")
SUMMARY_SCHEMA = "axisym.summary"
SCHEMA_VERSION = 1


# ──────────────────────────────────────────────
# solve
# ──────────────────────────────────────────────

@dataclass
class Problem:
    """組み立て前までの準備（曲線・離散化・電荷・評価点・境界データ）"""
    config: RunConfig
    disc: Discretization
    x0: Optional[tuple[float, float]]
    charges: ChargeSet
    targets: EvaluationSet
    n_modes: int
    m_theta: int
    boundary_grid: np.ndarray

    def kernel(self, path: Optional[str] = None) -> LaplaceKernel:
        cfg = self.config
        return LaplaceKernel.boundary_operator(
            cfg.problem, x0=self.x0, complete=cfg.exterior_completion,
            policy=cfg.recursion_policy, path=path or cfg.kernel_path, oversample=cfg.fft_oversample)


@dataclass
class SolveResult:
    problem: Problem
    sigma_grid: np.ndarray
    u_num: np.ndarray
    u_exact: np.ndarray
    error: float
    min_rcond: float
    timings: dict = field(default_factory=dict)


def _resolve_x0(config: RunConfig, curve) -> Optional[tuple[float, float]]:
    if config.problem != "exterior" or not config.exterior_completion:
        return None
    x0 = config.x0 if config.x0 is not None else interior_point(curve)
    if not contains_point(curve, *x0):
        raise ConfigurationError(f"x0: {x0} は曲線の囲む領域の内側にありません")
    return x0


def prepare_problem(config: RunConfig) -> Problem:
    config.validate()
    curve = curve_from_spec(config.curve)
    disc = build_discretization(curve, config.n_panels, config.n_gauss)
    x0 = _resolve_x0(config, curve)
    charges = make_charges(curve, config.problem, config.charge_count, config.charge_seed)
    targets = make_targets(curve, config.problem, config.eval_count, config.eval_radius)

    n_modes = config.n_modes
    if config.truncation_tol is not None:
        sample = boundary_data(charges, disc, config.n_theta or default_theta_count(n_modes))
        n_modes = min(select_truncation(sample, config.truncation_tol), config.n_modes)
        logger.info(f"打ち切り N_F={n_modes} を選びました (eps={config.truncation_tol:g})")
    m_theta = config.n_theta or default_theta_count(n_modes)
    grid = boundary_data(charges, disc, m_theta)
    for relation in RELATIONS:
        for i in range(disc.n_gauss):
            near_field_rule(i, relation)
    return Problem(config, disc, x0, charges, targets, n_modes, m_theta, grid)


def run_solve(config: RunConfig) -> SolveResult:
    """境界データ作成 → A_n 組み立て → 分解 → FFT → モードごとの求解 → 評価"""
    timings = {}
    started = time.perf_counter()
    problem = prepare_problem(config)
    timings["T_setup"] = time.perf_counter() - started
    logger.info(f"問題設定: {config.curve} ({config.problem}), N_P={config.n_panels}, "
                f"N_F={problem.n_modes}, M_θ={problem.m_theta}, DOF={problem.disc.node_count}")

    started = time.perf_counter()
    systems = build_modal_systems(problem.disc, problem.kernel(), problem.n_modes, config.threads)
    timings["T_mat"] = time.perf_counter() - started

    started = time.perf_counter()
    factors = factorize(systems, config.explicit_inverse, config.threads)
    timings["T_inv"] = time.perf_counter() - started
    del systems

    started = time.perf_counter()
    rhs_modes = BIE_SCALE * fourier_analyze(problem.boundary_grid, problem.n_modes)
    t_fft = time.perf_counter() - started

    started = time.perf_counter()
    sigma_modes = solve_all(factors, rhs_modes, config.threads)
    timings["T_apply"] = time.perf_counter() - started

    started = time.perf_counter()
    sigma_grid = fourier_synthesize(sigma_modes, problem.m_theta)
    timings["T_fft"] = t_fft + time.perf_counter() - started

    started = time.perf_counter()
    u_num = eval_double_layer_potential(sigma_grid, problem.disc, problem.targets.points,
                                        config.problem, problem.x0, config.exterior_completion)
    u_exact = point_charge_potential(problem.charges, problem.targets.points)
    error = relative_linf_error(u_num, u_exact)
    timings["T_eval"] = time.perf_counter() - started

    min_rcond = min(f.rcond for f in factors)
    logger.info(f"相対 l∞ 誤差 {error:.5e} ("
                + ", ".join(f"{k}={timings[k]:.3f}s" for k in PHASES) + ")")
    return SolveResult(problem, sigma_grid, u_num, u_exact, error, min_rcond, timings)


# ──────────────────────────────────────────────
# convergence / timing / conditioning
# ──────────────────────────────────────────────

def run_convergence(config: RunConfig, panels: Sequence[int], modes: Sequence[int]) -> list[dict]:
    rows = []
    for n_panels in panels:
        for fourier_modes in modes:
            result = run_solve(config.replace(n_panels=n_panels, fourier_modes=fourier_modes))
            rows.append({"n_panels": n_panels, "fourier_modes": fourier_modes,
                         "n_modes": result.problem.n_modes, "dof": result.problem.disc.node_count,
                         "error": result.error, **{k: result.timings[k] for k in PHASES}})
    return rows


def convergence_table(rows: Sequence[dict]) -> tuple[list[int], list[int], dict]:
    """行 N_P・列 fourier_modes の誤差表"""
    panels = sorted({r["n_panels"] for r in rows})
    modes = sorted({r["fourier_modes"] for r in rows})
    cells = {(r["n_panels"], r["fourier_modes"]): r["error"] for r in rows}
    return panels, modes, cells


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if np.count_nonzero(ok) < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def run_timing(config: RunConfig, sweep: str, values: Sequence[int],
               compare_composite: bool = False) -> tuple[list[dict], dict]:
    if sweep not in ("panels", "modes"):
        raise ConfigurationError(f"sweep: panels / modes のいずれか (got {sweep!r})")
    key = "n_panels" if sweep == "panels" else "fourier_modes"
    rows = []
    for value in values:
        result = run_solve(config.replace(**{key: value}))
        row = {key: value, "n_modes": result.problem.n_modes,
               "dof": result.problem.disc.node_count, "error": result.error,
               **{k: result.timings[k] for k in (*PHASES, "T_eval")}}
        if compare_composite:
            started = time.perf_counter()
            build_modal_systems(result.problem.disc, result.problem.kernel("composite"),
                                result.problem.n_modes, config.threads)
            row["T_mat_composite"] = time.perf_counter() - started
            row["speedup"] = row["T_mat_composite"] / row["T_mat"]
            logger.info(f"{key}={value}: composite {row['T_mat_composite']:.3f}s / "
                        f"recursion {row['T_mat']:.3f}s = {row['speedup']:.1f}x")
        rows.append(row)

    summary = {"sweep": sweep, "parameter": key, "values": list(values),
               "slopes": {phase: loglog_slope(values, [r[phase] for r in rows]) for phase in PHASES}}
    if compare_composite:
        summary["slopes"]["T_mat_composite"] = loglog_slope(values, [r["T_mat_composite"] for r in rows])
    logger.info(f"log-log 傾き ({key}): T_mat={summary['slopes']['T_mat']:.2f}")
    return rows, summary


def run_conditioning(config: RunConfig) -> list[dict]:
    problem = prepare_problem(config)
    systems = build_modal_systems(problem.disc, problem.kernel(), problem.n_modes, config.threads)
    rows = conditioning_table(systems)
    logger.info(f"条件数: n=0 → {rows[0]['cond']:.3e}, n={rows[-1]['n']} → {rows[-1]['cond']:.3e}")
    return rows


# ──────────────────────────────────────────────
# quad-check
# ──────────────────────────────────────────────

def _relative(value: float, exact: float) -> float:
    return abs(value - exact) / max(abs(exact), 1.0)


def run_quad_check(seed: int = 0) -> list[dict]:
    """埋め込み表の正確さを確認する（rule, index, residual）"""
    rng = np.random.default_rng(seed)
    rows = []

    gauss = gauss_rule()
    for degree in range(2 * len(gauss)):
        exact = 2.0 / (degree + 1) if degree % 2 == 0 else 0.0
        value = gauss.integrate(lambda x: x ** degree)
        rows.append({"rule": gauss.kind, "index": degree, "residual": abs(value - exact)})

    nodes = gauss.nodes
    for i in range(1, len(nodes) + 1):
        rule = singular_rule(i)
        xi = nodes[i - 1]
        p = np.polynomial.Polynomial(rng.uniform(-1, 1, 20))
        q = np.polynomial.Polynomial(rng.uniform(-1, 1, 20))

        def f(x, p=p, q=q, xi=xi):
            return p(x) + q(x) * np.log(np.abs(xi - x))

        exact = adaptive_integrate(f, -1.0, 1.0, 1e-13, points=[xi])
        rows.append({"rule": rule.kind, "index": i, "residual": _relative(rule.integrate(f), exact)})

    for k in range(NEARBY_DECADES):
        xbar = 0.5 if k == 0 else 10.0 ** (-(k + 0.5))
        rule = nearby_rule(xbar)
        p = np.polynomial.Polynomial(rng.uniform(-1, 1, 20))
        q = np.polynomial.Polynomial(rng.uniform(-1, 1, 20))

        def g(x, p=p, q=q, xbar=xbar):
            return p(x) + q(x) * np.log(x + xbar)

        exact = adaptive_integrate(g, 0.0, 1.0, 1e-13, points=[min(10 * xbar, 0.5)])
        rows.append({"rule": rule.kind, "index": k, "residual": _relative(rule.integrate(g), exact)})

    worst = max(r["residual"] for r in rows)
    logger.info(f"求積表チェック: {len(rows)} 件, 最大残差 {worst:.3e}, sha256={table_checksum()}")
    return rows


# ──────────────────────────────────────────────
# 書き出し
# ──────────────────────────────────────────────

def write_csv(path: Path, schema: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"# schema: {schema} v{SCHEMA_VERSION}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"書き出し: {path} ({len(rows)} 行)")
    return path


def write_dict_rows(path: Path, schema: str, rows: Sequence[dict]) -> Path:
    header = list(rows[0]) if rows else []
    return write_csv(path, schema, header, [[r.get(k, "") for k in header] for r in rows])


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"JSON にできない値: {type(value).__name__}")


def write_json(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=1, default=_json_default)
    logger.info(f"書き出し: {path}")
    return path


def write_solve_artifacts(result: SolveResult, output_dir: Path) -> dict:
    problem = result.problem
    disc = problem.disc
    theta = 2 * math.pi * np.arange(problem.m_theta) / problem.m_theta

    sigma_rows = [[k, f"{disc.t[k]:.16e}", f"{disc.r[k]:.16e}", f"{disc.z[k]:.16e}", m,
                   f"{theta[m]:.16e}", f"{result.sigma_grid[k, m]:.16e}"]
                  for k in range(disc.node_count) for m in range(problem.m_theta)]
    write_csv(output_dir / "sigma_grid.csv", "sigma_grid",
              ["node", "t", "r", "z", "theta_index", "theta", "sigma"], sigma_rows)

    pot_rows = [[j, *(f"{v:.16e}" for v in x), f"{un:.16e}", f"{ue:.16e}", f"{abs(un - ue):.3e}"]
                for j, (x, un, ue) in enumerate(zip(problem.targets.points, result.u_num, result.u_exact))]
    write_csv(output_dir / "potentials.csv", "potentials",
              ["target", "x", "y", "z", "u_num", "u_exact", "abs_error"], pot_rows)

    summary = {
        "schema": SUMMARY_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "config": dataclasses.asdict(problem.config),
        "curve": disc.curve.name,
        "n_modes": problem.n_modes,
        "mode_count": 2 * problem.n_modes + 1,
        "n_theta": problem.m_theta,
        "dof": disc.node_count,
        "x0": problem.x0,
        "relative_linf_error": result.error,
        "min_rcond": result.min_rcond,
        "timings": {k: result.timings[k] for k in PHASES},
        "T_eval": result.timings["T_eval"],
        "table_checksum": table_checksum(),
    }
    write_json(output_dir / "summary.json", summary)
    return summary


def write_convergence(rows: Sequence[dict], output_dir: Path) -> None:
    write_dict_rows(output_dir / "convergence.csv", "convergence", rows)
    panels, modes, cells = convergence_table(rows)
    table = [[p, *(f"{cells[(p, m)]:.5e}" if (p, m) in cells else "" for m in modes)] for p in panels]
    write_csv(output_dir / "convergence_table.csv", "convergence_table",
              ["n_panels", *(str(m) for m in modes)], table)
