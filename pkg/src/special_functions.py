# -*- coding: utf-8 -*-
"""完全楕円積分と半整数次 Legendre 陪関数 Q_{n-1/2}(χ)。

表記: q[m] = Q_{m-1/2}(χ)、χ > 1。すべて χ の配列についてベクトル化してあり、
列は shape (N+1, *χ.shape) で返す。

χ が 1 に近いときは χ - 1 を別に渡すと桁落ちしない（chi_minus_one 引数）。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

POLICIES = ("auto", "forward", "backward")

# auto: 前進漸化式は誤差が λ^{2n} で増え、Q_{1/2} の初期値は χ² 程度の桁落ちを持つ
_FORWARD_CHI_MAX = 2.0
_FORWARD_GROWTH_MAX = math.log(1e3)
# Miller の開始番号: λ^{-2(M-N)} ≤ 1e-16
_MILLER_DIGITS = 0.5 * math.log(1e16)
_MILLER_PAD = 20
_MILLER_MAX_OFFSET = 100_000


@dataclass(frozen=True)
class LegendreQSequence:
    chi: np.ndarray
    chi_minus_one: np.ndarray
    n_max: int
    table: np.ndarray
    method: str

    @property
    def values(self) -> np.ndarray:
        return self.table[: self.n_max + 1]

    def __getitem__(self, m: int) -> np.ndarray:
        # Q_{-m-1/2} = Q_{m-1/2}
        m = -m if m < 0 else m
        if m > self.n_max and m >= len(self.table):
            raise IndexError(f"Q_{{{m}-1/2}} は計算範囲外 (n_max={self.n_max})")
        return self.table[m]

    def derivatives(self) -> np.ndarray:
        """dQ_{n-1/2}/dχ, n = 0..n_max"""
        prev = np.concatenate([self.table[1:2], self.table[: self.n_max]], axis=0)
        n = np.arange(self.n_max + 1).reshape((-1,) + (1,) * self.chi.ndim)
        return legendre_q_derivative(self.chi, n, self.values, prev, self.chi_minus_one)


def _prepare(chi, chi_minus_one=None) -> tuple[np.ndarray, np.ndarray]:
    chi = np.asarray(chi, dtype=float)
    cm1 = chi - 1.0 if chi_minus_one is None else np.broadcast_to(
        np.asarray(chi_minus_one, dtype=float), chi.shape)
    if not np.all(cm1 > 0) or not np.all(np.isfinite(chi)):
        raise DomainError("χ > 1 が必要です（source と target が一致しています）")
    return chi, cm1


def growth_rate(chi, chi_minus_one=None) -> np.ndarray:
    """ln λ = arccosh χ。Q_{n-1/2} は λ^{-n} で減衰する"""
    chi, cm1 = _prepare(chi, chi_minus_one)
    return np.log1p(cm1 + np.sqrt(cm1 * (chi + 1.0)))


# ──────────────────────────────────────────────
# 完全楕円積分（AGM）
# ──────────────────────────────────────────────

def _agm(mu: np.ndarray, kprime: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.ones_like(mu)
    b = kprime.copy()
    total = 0.5 * mu * mu
    power = 0.5
    for _ in range(64):
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        total = total + power * c * c
        if np.all(np.abs(c) <= 1e-15 * a):
            break
    k = 0.5 * math.pi / a
    return k, k * (1.0 - total)


def elliptic_ke(mu, kprime=None) -> tuple[np.ndarray, np.ndarray]:
    """(K(μ), E(μ))。μ は母数 k（パラメータ m = k² ではない）。

    kprime = √(1 - μ²) を渡すと μ → 1 付近で精度が落ちない。
    """
    mu = np.asarray(mu, dtype=float)
    if kprime is None:
        if np.any(mu >= 1.0):
            raise DomainError("K(μ) は μ < 1 が必要です")
        kprime = np.sqrt((1.0 - mu) * (1.0 + mu))
    kprime = np.broadcast_to(np.asarray(kprime, dtype=float), mu.shape)
    if np.any(mu < 0) or np.any(kprime <= 0):
        raise DomainError("K(μ) は 0 ≤ μ < 1 が必要です")
    k, e = _agm(mu, np.array(kprime))
    return k, e


def elliptic_e(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0) or np.any(mu > 1):
        raise DomainError("E(μ) は 0 ≤ μ ≤ 1 が必要です")
    out = np.ones_like(mu)
    inside = mu < 1.0
    if np.any(inside):
        out[inside] = elliptic_ke(mu[inside])[1]
    return out


# ──────────────────────────────────────────────
# Q_{n-1/2}: 初期値・前進・後退（Miller）
# ──────────────────────────────────────────────

def _seeds(chi: np.ndarray, cm1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = np.sqrt(2.0 / (chi + 1.0))
    k, e = elliptic_ke(mu, np.sqrt(cm1 / (chi + 1.0)))
    q0 = mu * k
    q1 = chi * q0 - np.sqrt(2.0 * (chi + 1.0)) * e
    return q0, q1


def _forward(chi, cm1, n_top: int) -> np.ndarray:
    table = np.empty((n_top + 1,) + chi.shape)
    table[0], table[1] = _seeds(chi, cm1)
    for m in range(2, n_top + 1):
        table[m] = (4 * (m - 1) * chi * table[m - 1] - (2 * m - 3) * table[m - 2]) / (2 * m - 1)
    return table


def _miller_offsets(chi, cm1) -> np.ndarray:
    offsets = _MILLER_PAD + np.ceil(_MILLER_DIGITS / growth_rate(chi, cm1))
    if np.any(offsets > _MILLER_MAX_OFFSET):
        logger.warning(f"Miller 法の開始番号を N+{_MILLER_MAX_OFFSET} で打ち切りました "
                       f"(min χ-1 = {float(cm1.min()):.2e})")
    return np.minimum(offsets, _MILLER_MAX_OFFSET).astype(int)


def _backward(chi, cm1, n_top: int, offsets: np.ndarray) -> np.ndarray:
    """比 r_m = q_m / q_{m-1} を上から下へ連分数で計算し、q_0 = μK で規格化する"""
    ratios = np.empty((n_top + 1,) + chi.shape)
    start = n_top + int(offsets.max())
    lam = chi + np.sqrt(cm1 * (chi + 1.0))
    r = 1.0 / lam
    for m in range(start, 1, -1):
        r = (2 * m - 3) / (4 * (m - 1) * chi - (2 * m - 1) * r)
        if m - 1 <= n_top:
            ratios[m - 1] = r
    table = np.empty_like(ratios)
    table[0] = _seeds(chi, cm1)[0]
    for m in range(1, n_top + 1):
        table[m] = table[m - 1] * ratios[m]
    return table


def _backward_bucketed(chi, cm1, n_top: int) -> np.ndarray:
    # 開始番号の近いものをまとめて回す（遠い対の大半は数十段で済む）
    offsets = _miller_offsets(chi, cm1)
    table = np.empty((n_top + 1,) + chi.shape)
    buckets = np.ceil(np.log2(offsets)).astype(int)
    for b in np.unique(buckets):
        sel = buckets == b
        table[:, sel] = _backward(chi[sel], cm1[sel], n_top, offsets[sel])
    return table


def legendre_q_forward(chi, n_max: int, chi_minus_one=None) -> LegendreQSequence:
    chi, cm1 = _prepare(chi, chi_minus_one)
    table = _forward(chi, cm1, max(n_max, 1))
    return LegendreQSequence(chi, cm1, n_max, table, "forward")


def legendre_q_backward(chi, n_max: int, chi_minus_one=None) -> LegendreQSequence:
    chi, cm1 = _prepare(chi, chi_minus_one)
    flat_chi, flat_cm1 = chi.reshape(-1), cm1.reshape(-1)
    n_top = max(n_max, 1)
    table = _backward_bucketed(flat_chi, flat_cm1, n_top).reshape((n_top + 1,) + chi.shape)
    return LegendreQSequence(chi, cm1, n_max, table, "backward")


def legendre_q(chi, n_max: int, policy: str = "auto", chi_minus_one=None) -> LegendreQSequence:
    """policy に従って前進／Miller を選ぶ。auto は要素ごとに安定な方を使う"""
    if policy == "forward":
        return legendre_q_forward(chi, n_max, chi_minus_one)
    if policy == "backward":
        return legendre_q_backward(chi, n_max, chi_minus_one)
    if policy != "auto":
        raise ConfigurationError(f"recursion_policy: {'/'.join(POLICIES)} のいずれか (got {policy!r})")

    chi, cm1 = _prepare(chi, chi_minus_one)
    n_top = max(n_max, 1)
    flat_chi, flat_cm1 = chi.reshape(-1), cm1.reshape(-1)
    forward = (flat_chi <= _FORWARD_CHI_MAX) & (2 * n_top * growth_rate(flat_chi, flat_cm1) <= _FORWARD_GROWTH_MAX)
    table = np.empty((n_top + 1, flat_chi.size))
    if np.any(forward):
        table[:, forward] = _forward(flat_chi[forward], flat_cm1[forward], n_top)
    if not np.all(forward):
        back = ~forward
        table[:, back] = _backward_bucketed(flat_chi[back], flat_cm1[back], n_top)
    logger.debug(f"legendre_q: forward {int(forward.sum())} / backward {int((~forward).sum())}")
    return LegendreQSequence(chi, cm1, n_max, table.reshape((n_top + 1,) + chi.shape), "auto")


def legendre_q_derivative(chi, n, q_n, q_prev, chi_minus_one=None) -> np.ndarray:
    """dQ_{n-1/2}/dχ = (2n-1)/(2(χ²-1))·(χ Q_{n-1/2} - Q_{n-3/2})

    n = 0 では q_prev に Q_{-3/2} = Q_{1/2} を渡す。
    """
    chi, cm1 = _prepare(chi, chi_minus_one)
    n = np.asarray(n)
    q_n = np.asarray(q_n, dtype=float)
    q_prev = np.asarray(q_prev, dtype=float)
    # χ·q_n - q_prev = (χ-1)·q_n + (q_n - q_prev)
    return (2 * n - 1) / (2.0 * cm1 * (chi + 1.0)) * (cm1 * q_n + (q_n - q_prev))
