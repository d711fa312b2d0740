# -*- coding: utf-8 -*-
"""回転不変核の方位角 Fourier 係数 k_n。

    k(θ - θ') = (1/√(2π)) Σ_n e^{in(θ-θ')} k_n,   k_n = ∫_T e^{-inθ}/√(2π) k(θ) dθ

Laplace の一重層・二重層（内部／外部）は Q_{n-1/2}(χ) の閉形式（recursion 経路）、
任意の滑らかな核は FFT 経路、検証用に合成 Gauss（composite）と適応積分の経路を持つ。
Laplace 核は n について偶・実数なので n = 0..N_F だけを持つ。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft

from errors import ConfigurationError, DomainError
from quadrature import adaptive_integrate
from special_functions import POLICIES, legendre_q

logger = logging.getLogger(__name__)

KINDS = ("single", "interior", "exterior")
PATHS = ("recursion", "fft", "composite")

# -½σ + Kσ = f  ⇔  σ - 2Kσ = -2f（境界の跳びを単位行列に揃える）
BIE_SCALE = -2.0

_SQRT_2PI = math.sqrt(2 * math.pi)
_FOUR_PI = 4 * math.pi


@dataclass(frozen=True)
class KernelPairGeometry:
    """target (r, z) と source (r', z', n_r', n_z') の組。配列は broadcast 可能な形で持つ"""
    r: np.ndarray
    z: np.ndarray
    rs: np.ndarray
    zs: np.ndarray
    nrs: np.ndarray
    nzs: np.ndarray
    chi: np.ndarray
    chi_minus_one: np.ndarray

    @classmethod
    def between(cls, r, z, rs, zs, nrs=0.0, nzs=0.0) -> "KernelPairGeometry":
        r, z, rs, zs, nrs, nzs = (np.asarray(v, dtype=float) for v in (r, z, rs, zs, nrs, nzs))
        if np.any(r <= 0) or np.any(rs <= 0):
            raise DomainError("χ は r > 0 かつ r' > 0 でのみ定義されます")
        cm1 = ((r - rs) ** 2 + (z - zs) ** 2) / (2 * r * rs)
        return cls(r, z, rs, zs, nrs, nzs, 1.0 + cm1, cm1)

    @property
    def mu(self) -> np.ndarray:
        return np.sqrt(2.0 / (self.chi + 1.0))

    @property
    def dchi_drs(self) -> np.ndarray:
        return (self.rs ** 2 - self.r ** 2 - (self.z - self.zs) ** 2) / (2 * self.r * self.rs ** 2)

    @property
    def dchi_dzs(self) -> np.ndarray:
        return (self.zs - self.z) / (self.r * self.rs)

    @property
    def dchi_dn(self) -> np.ndarray:
        """n_r'·∂χ/∂r' + n_z'·∂χ/∂z'（近接対で桁落ちしない形）"""
        d2 = (self.r - self.rs) ** 2 + (self.z - self.zs) ** 2
        ndot = self.nrs * (self.rs - self.r) + self.nzs * (self.zs - self.z)
        return (2 * self.rs * ndot - self.nrs * d2) / (2 * self.r * self.rs ** 2)


@dataclass(frozen=True)
class ModalCoefficients:
    """symmetric=True なら values[n] (n = 0..n_max)、False なら values[n + n_max] (n = -n_max..n_max)"""
    values: np.ndarray
    n_max: int
    symmetric: bool = True

    def coefficient(self, n: int) -> np.ndarray:
        if abs(n) > self.n_max:
            raise IndexError(f"モード {n} は範囲外 (n_max={self.n_max})")
        return self.values[abs(n)] if self.symmetric else self.values[n + self.n_max]

    def even_part(self) -> np.ndarray:
        """n = 0..n_max の実部（偶関数の核用）"""
        if self.symmetric:
            return np.real(self.values)
        return np.real(self.values[self.n_max:])


# ──────────────────────────────────────────────
# 閉形式（Legendre 漸化式）
# ──────────────────────────────────────────────

def _prefactor(geom: KernelPairGeometry) -> np.ndarray:
    return 1.0 / np.sqrt(8 * math.pi ** 3 * geom.r * geom.rs)


def single_layer_modal(geom: KernelPairGeometry, n_max: int, policy: str = "auto") -> ModalCoefficients:
    """s_n = Q_{n-1/2}(χ) / √(8π³ r r')"""
    seq = legendre_q(geom.chi, n_max, policy, geom.chi_minus_one)
    return ModalCoefficients(_prefactor(geom) * seq.values, n_max)


def double_layer_modal_interior(geom: KernelPairGeometry, n_max: int,
                                policy: str = "auto") -> ModalCoefficients:
    """d_n^(i) = [n_r'(Q'·∂χ/∂r' - Q/(2r')) + n_z'·Q'·∂χ/∂z'] / √(8π³ r r')"""
    seq = legendre_q(geom.chi, n_max, policy, geom.chi_minus_one)
    bracket = seq.derivatives() * geom.dchi_dn - geom.nrs * seq.values / (2 * geom.rs)
    return ModalCoefficients(_prefactor(geom) * bracket, n_max)


def completion_modal(r, z, x0: tuple[float, float], n_max: int, policy: str = "auto") -> np.ndarray:
    """1/(4π|x - x0(θ')|) の係数。x0(θ') は source の方位角と一緒に回る。

    r0 = 0 のときは θ に依らないので n = 0 だけが残る。
    """
    r, z = np.asarray(r, dtype=float), np.asarray(z, dtype=float)
    r0, z0 = x0
    if r0 == 0.0:
        rho = np.sqrt(r ** 2 + (z - z0) ** 2)
        out = np.zeros((n_max + 1,) + np.broadcast(r, z).shape)
        out[0] = 1.0 / (math.sqrt(8 * math.pi) * rho)
        return out
    geom = KernelPairGeometry.between(r, z, r0, z0)
    return single_layer_modal(geom, n_max, policy).values


def double_layer_modal_exterior(geom: KernelPairGeometry, x0: tuple[float, float], n_max: int,
                                policy: str = "auto", curve=None) -> ModalCoefficients:
    """d_n^(e) = -d_n^(i) + s_n(target, x0)。curve を渡すと x0 が内側か検査する"""
    if curve is not None:
        from geometry import contains_point
        if not contains_point(curve, *x0):
            raise ConfigurationError(f"x0: {x0} は曲線の内側にありません")
    interior = double_layer_modal_interior(geom, n_max, policy).values
    return ModalCoefficients(completion_modal(geom.r, geom.z, x0, n_max, policy) - interior, n_max)


# ──────────────────────────────────────────────
# 物理空間の核（FFT・合成 Gauss 経路用）。θ は方位角差
# ──────────────────────────────────────────────

def _distance_squared(r, z, rs, zs, theta):
    # r² + r'² - 2rr'cosθ + Δz² を桁落ちなしで
    return (r - rs) ** 2 + (z - zs) ** 2 + 4 * r * rs * np.sin(0.5 * theta) ** 2


def single_layer_physical(r, z, rs, zs, theta) -> np.ndarray:
    return 1.0 / (_FOUR_PI * np.sqrt(_distance_squared(r, z, rs, zs, theta)))


def double_layer_physical(r, z, rs, zs, nrs, nzs, theta) -> np.ndarray:
    """n(x')·(x - x') / (4π|x - x'|³)"""
    rho2 = _distance_squared(r, z, rs, zs, theta)
    numer = nrs * (r * np.cos(theta) - rs) + nzs * (z - zs)
    return numer / (_FOUR_PI * rho2 * np.sqrt(rho2))


def kernel_coeffs_fft(kernel: Callable[[np.ndarray], np.ndarray], n_max: int,
                      oversample: int = 4) -> ModalCoefficients:
    """M ≥ oversample·(2N+1) 点の台形則を FFT で一度に。k_n = √(2π)/M · fft[n]"""
    m = sfft.next_fast_len(max(int(oversample), 1) * (2 * n_max + 1))
    theta = 2 * math.pi * np.arange(m) / m
    samples = np.asarray(kernel(theta))
    spectrum = sfft.fft(samples, axis=0) * (_SQRT_2PI / m)
    idx = np.arange(-n_max, n_max + 1) % m
    return ModalCoefficients(spectrum[idx], n_max, symmetric=False)


def kernel_coeffs_adaptive(kernel: Callable[[float], float], n_max: int, tol: float = 1e-12,
                           points=None) -> ModalCoefficients:
    """偶関数核の検証用オラクル: k_n = (2/√(2π)) ∫_0^π k(t) cos(nt) dt をモードごとに適応積分"""
    values = np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n == 0:
            integral = adaptive_integrate(kernel, 0.0, math.pi, tol, points=points)
        else:
            integral = adaptive_integrate(kernel, 0.0, math.pi, tol, points=points, weight="cos", wvar=n)
        values[n] = 2.0 / _SQRT_2PI * integral
    return ModalCoefficients(values, n_max)


# ──────────────────────────────────────────────
# 合成 Gauss（組み立て時間の比較・検証用）
# ──────────────────────────────────────────────

_COMPOSITE_RULE = np.polynomial.legendre.leggauss(16)
_COMPOSITE_CHUNK = 2_000_000


def _composite_grid(delta: float, levels: int, uniform: int) -> np.ndarray:
    # 0 → δ → 2δ → … → 2^L δ は幾何的、その先 π までは等間隔
    top = delta * 2.0 ** levels
    geometric = np.concatenate([[0.0], delta * 2.0 ** np.arange(levels + 1)])
    return np.concatenate([geometric, np.linspace(top, math.pi, uniform + 1)[1:]])


def kernel_coeffs_composite(physical: Callable[..., np.ndarray], geom_arrays: dict,
                            chi_minus_one: np.ndarray, n_max: int) -> np.ndarray:
    """対ごとに t = 0 へ幾何的に細分した 16 点 Gauss 合成則で全モードを一度に計算する。

    physical(**geom_arrays, theta=t) が物理核。戻り値は (n_max+1, *shape)。
    """
    shape = np.shape(chi_minus_one)
    cm1 = np.reshape(chi_minus_one, -1)
    flat = {k: np.broadcast_to(v, shape).reshape(-1) for k, v in geom_arrays.items()}
    delta = np.minimum(np.sqrt(2 * cm1) / 8, 1.0)
    levels = np.clip(np.ceil(np.log2(1.0 / delta)), 0, 60).astype(int)
    uniform = max(4, n_max // 4 + 4)
    x, w = _COMPOSITE_RULE
    n = np.arange(n_max + 1)[:, None, None]
    out = np.empty((n_max + 1, cm1.size))

    for lev in np.unique(levels):
        idx = np.flatnonzero(levels == lev)
        npanel = lev + 1 + uniform
        step = max(1, _COMPOSITE_CHUNK // (npanel * 16 * (n_max + 1)))
        for start in range(0, idx.size, step):
            sel = idx[start:start + step]
            grid = np.stack([_composite_grid(d, lev, uniform) for d in delta[sel]])
            a, b = grid[:, :-1], grid[:, 1:]
            t = (0.5 * (a + b))[:, :, None] + (0.5 * (b - a))[:, :, None] * x
            wt = (0.5 * (b - a))[:, :, None] * w
            t, wt = t.reshape(len(sel), -1), wt.reshape(len(sel), -1)
            vals = physical(**{k: v[sel, None] for k, v in flat.items()}, theta=t)
            out[:, sel] = np.einsum("gk,ngk->ng", wt * vals, np.cos(n * t[None]))
    return (2.0 / _SQRT_2PI * out).reshape((n_max + 1,) + shape)


# ──────────────────────────────────────────────
# Laplace 核の束ね
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class LaplaceKernel:
    """核の種類・x0・評価経路・倍率をまとめた値オブジェクト。

    scale は係数にそのまま掛かる。連立方程式用は BIE_SCALE（boundary_operator）。
    """
    kind: str = "interior"
    x0: Optional[tuple[float, float]] = None
    complete: bool = True
    policy: str = "auto"
    path: str = "recursion"
    oversample: int = 4
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"problem: {'/'.join(KINDS)} のいずれか (got {self.kind!r})")
        if self.path not in PATHS:
            raise ConfigurationError(f"kernel_path: {'/'.join(PATHS)} のいずれか (got {self.path!r})")
        if self.policy not in POLICIES:
            raise ConfigurationError(f"recursion_policy: {'/'.join(POLICIES)} のいずれか (got {self.policy!r})")
        if self.kind == "exterior" and self.complete and self.x0 is None:
            raise ConfigurationError("x0: 外部問題の補正項には x0 が必要です")

    @classmethod
    def boundary_operator(cls, problem: str, **kwargs) -> "LaplaceKernel":
        return cls(kind=problem, scale=BIE_SCALE, **kwargs)

    @property
    def completed(self) -> bool:
        return self.kind == "exterior" and self.complete

    @property
    def far_path(self) -> str:
        """遠方ブロックの経路。合成 Gauss は近接ブロック専用なので漸化式に落とす"""
        return "recursion" if self.path == "composite" else self.path

    def modes(self, geom: KernelPairGeometry, n_max: int, path: Optional[str] = None) -> np.ndarray:
        """(n_max+1, *shape) の実数配列。path 省略時は self.path"""
        path = path or self.path
        if path == "recursion":
            if self.kind == "single":
                values = single_layer_modal(geom, n_max, self.policy).values
            else:
                values = double_layer_modal_interior(geom, n_max, self.policy).values
                if self.kind == "exterior":
                    values = -values
        elif path == "fft":
            coeffs = kernel_coeffs_fft(lambda th: self._physical_core(geom, th), n_max, self.oversample)
            values = coeffs.even_part()
        else:
            values = self._composite(geom, n_max)
        if self.completed:
            values = values + completion_modal(geom.r, geom.z, self.x0, n_max, self.policy)
        return self.scale * values

    def _physical_core(self, geom: KernelPairGeometry, theta: np.ndarray) -> np.ndarray:
        th = np.reshape(theta, (-1,) + (1,) * np.ndim(geom.chi))
        if self.kind == "single":
            return single_layer_physical(geom.r, geom.z, geom.rs, geom.zs, th)
        value = double_layer_physical(geom.r, geom.z, geom.rs, geom.zs, geom.nrs, geom.nzs, th)
        return -value if self.kind == "exterior" else value

    def physical(self, geom: KernelPairGeometry, theta: np.ndarray) -> np.ndarray:
        """物理核（補正項込み、scale 倍）を (len(theta), *shape) で"""
        value = self._physical_core(geom, theta)
        if self.completed:
            r0, z0 = self.x0
            th = np.reshape(theta, (-1,) + (1,) * np.ndim(geom.chi))
            value = value + single_layer_physical(geom.r, geom.z, r0, z0, th)
        return self.scale * value

    def _composite(self, geom: KernelPairGeometry, n_max: int) -> np.ndarray:
        if self.kind == "single":
            arrays = dict(r=geom.r, z=geom.z, rs=geom.rs, zs=geom.zs)
            return kernel_coeffs_composite(single_layer_physical, arrays, geom.chi_minus_one, n_max)
        arrays = dict(r=geom.r, z=geom.z, rs=geom.rs, zs=geom.zs, nrs=geom.nrs, nzs=geom.nzs)
        values = kernel_coeffs_composite(double_layer_physical, arrays, geom.chi_minus_one, n_max)
        return -values if self.kind == "exterior" else values
