# -*- coding: utf-8 -*-
"""境界データの Fourier 解析・合成、打ち切り選択、I + A_n の分解とモードごとの求解。

規約: f_n = ∫_T e^{-inθ}/√(2π) f(θ) dθ、f(θ) = Σ_n e^{inθ}/√(2π) f_n。
実データなので n ≥ 0 だけを持ち、負のモードは共役（A_{-n} = A_n）。
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import linalg

from assembly import ModalSystem
from errors import ConfigurationError, SingularSystemError

logger = logging.getLogger(__name__)

RCOND_MIN = 1e-14
_SQRT_2PI = math.sqrt(2 * math.pi)


def default_theta_count(n_max: int) -> int:
    """M_θ の既定値: 4(N_F + 1) 以上で FFT に都合のよい長さ"""
    return sfft.next_fast_len(4 * (n_max + 1), real=True)


def _check_grid(m_theta: int, n_max: int) -> None:
    if m_theta < 2 * n_max + 1:
        raise ConfigurationError(f"n_theta: M_θ={m_theta} は 2N_F+1={2 * n_max + 1} 以上が必要です")


def fourier_analyze(samples: np.ndarray, n_max: int) -> np.ndarray:
    """samples (..., M_θ) → 係数 (n_max+1, ...)（複素数、n = 0..n_max）"""
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[-1]
    _check_grid(m, n_max)
    spectrum = sfft.rfft(samples, axis=-1)[..., : n_max + 1] * (_SQRT_2PI / m)
    return np.moveaxis(spectrum, -1, 0)


def fourier_synthesize(modes: np.ndarray, m_theta: int) -> np.ndarray:
    """係数 (n_max+1, ...) → 格子値 (..., M_θ)。負のモードは共役として足し込む"""
    modes = np.asarray(modes)
    n_max = modes.shape[0] - 1
    _check_grid(m_theta, n_max)
    half = np.zeros((m_theta // 2 + 1,) + modes.shape[1:], dtype=complex)
    half[: n_max + 1] = modes * (m_theta / _SQRT_2PI)
    # n = 0 の虚部は実データでは 0
    half[0] = half[0].real
    return np.moveaxis(sfft.irfft(half, n=m_theta, axis=0), 0, -1)


def select_truncation(samples: np.ndarray, eps: float) -> int:
    """離散 L² ノルムで ||f - f_{N_F}|| ≤ eps·||f|| となる最小の N_F"""
    if eps <= 0:
        raise ConfigurationError(f"truncation_tol: 正の値が必要です (got {eps})")
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[-1]
    limit = (m - 1) // 2
    spectrum = sfft.rfft(samples, axis=-1)
    energy = np.abs(np.moveaxis(spectrum, -1, 0)) ** 2
    energy = energy.reshape(energy.shape[0], -1).sum(axis=1)
    # 片側スペクトル: n ≥ 1 は ±n の 2 本ぶん（偶数 M の Nyquist は 1 本）
    weight = np.full(len(energy), 2.0)
    weight[0] = 1.0
    if m % 2 == 0:
        weight[-1] = 1.0
    energy = energy * weight
    total = energy.sum()
    if total == 0:
        return 0
    tail = np.concatenate([np.cumsum(energy[::-1])[::-1][1:], [0.0]])
    ok = np.flatnonzero(np.sqrt(tail) <= eps * np.sqrt(total))
    n_sel = int(ok[0])
    if n_sel >= limit:
        logger.warning(f"select_truncation: スペクトルが格子の限界 N={limit} まで減衰しません")
        return limit
    return n_sel


# ──────────────────────────────────────────────
# 分解と求解
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class FactorizedSystem:
    mode: int
    lu: Optional[np.ndarray]
    piv: Optional[np.ndarray]
    rcond: float
    inverse: Optional[np.ndarray] = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return self.solve(rhs.real) + 1j * self.solve(rhs.imag)
        if self.inverse is not None:
            return self.inverse @ rhs
        return linalg.lu_solve((self.lu, self.piv), rhs)


def _factor_one(system: ModalSystem, explicit_inverse: bool) -> FactorizedSystem:
    matrix = system.operator()
    anorm = np.linalg.norm(matrix, 1)
    lu, piv = linalg.lu_factor(matrix, overwrite_a=True, check_finite=True)
    gecon, = linalg.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= RCOND_MIN:
        raise SingularSystemError(system.n, float(rcond))
    logger.debug(f"モード n={system.n}: rcond={rcond:.3e}")
    if explicit_inverse:
        inverse = linalg.lu_solve((lu, piv), np.eye(system.size))
        return FactorizedSystem(system.n, None, None, float(rcond), inverse)
    return FactorizedSystem(system.n, lu, piv, float(rcond))


def factorize(systems: Sequence[ModalSystem], explicit_inverse: bool = False,
              threads: int = 1) -> list[FactorizedSystem]:
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        factors = list(pool.map(lambda s: _factor_one(s, explicit_inverse), systems))
    worst = min((f.rcond for f in factors), default=float("nan"))
    logger.info(f"分解完了: {len(factors)} モード, min rcond={worst:.3e} "
                f"({time.perf_counter() - started:.2f}s)")
    return factors


def solve_all(factors: Sequence[FactorizedSystem], rhs_modes: np.ndarray,
              threads: int = 1) -> np.ndarray:
    """rhs_modes (n_max+1, N[, k]) → σ_n 同形。モード間は結合しない"""
    rhs_modes = np.asarray(rhs_modes)
    if rhs_modes.shape[0] != len(factors):
        raise ValueError(f"モード数が一致しません: factors={len(factors)}, rhs={rhs_modes.shape[0]}")
    for k, f in enumerate(factors):
        if f.mode != k:
            raise ValueError(f"factors[{k}] のモードが {f.mode} です")
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        solved = list(pool.map(lambda fr: fr[0].solve(fr[1]), zip(factors, rhs_modes)))
    return np.stack(solved)


def conditioning_table(systems: Sequence[ModalSystem]) -> list[dict]:
    """モードごとの特異値の最大・最小と条件数"""
    rows = []
    for system in systems:
        sv = linalg.svdvals(system.operator())
        rows.append({"n": system.n, "sigma_max": float(sv[0]), "sigma_min": float(sv[-1]),
                     "cond": float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf})
    return rows
