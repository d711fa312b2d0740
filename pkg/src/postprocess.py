# -*- coding: utf-8 -*-
"""点電荷による厳密解、境界外での二重層ポテンシャル評価、誤差指標。

内部問題:  u(x) = ∫_Γ d(x, x') σ(x') dA(x')
外部問題:  u(x) = ∫_Γ [-d(x, x') + 1/(4π|x - x0(θ')|)] σ(x') dA(x')
  d(x, x') = n(x')·(x - x') / (4π|x - x'|³)、x0(θ') は source と一緒に回る。

積分はパネル Gauss（弧長）× θ 方向の台形則（M_θ 点）のテンソル積。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import DomainError
from geometry import (
    Discretization,
    GeneratingCurve,
    axis_center,
    bounding_radius,
    inradius,
    interior_point,
)

logger = logging.getLogger(__name__)

SIDES = ("outside", "inside")
_FOUR_PI = 4 * math.pi
_EVAL_CHUNK = 2_000_000


@dataclass(frozen=True)
class ChargeSet:
    """side: 電荷が Γ の外側 (outside, 内部問題用) か内側 (inside, 外部問題用) か"""
    locations: np.ndarray
    strengths: np.ndarray
    side: str

    def __len__(self) -> int:
        return len(self.strengths)


@dataclass(frozen=True)
class EvaluationSet:
    points: np.ndarray
    side: str
    center: tuple[float, float, float]
    radius: float

    def __len__(self) -> int:
        return len(self.points)


def _meridian(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    points = np.atleast_2d(points)
    return np.hypot(points[:, 0], points[:, 1]), points[:, 2]


def meridian_clearance(curve: GeneratingCurve, points: np.ndarray) -> np.ndarray:
    """各点から Γ までの距離（子午面での距離に等しい）"""
    rho, z = _meridian(points)
    r, zc = curve.samples()
    return np.min(np.hypot(rho[:, None] - r[None, :], z[:, None] - zc[None, :]), axis=1)


def _random_directions(rng: np.random.Generator, count: int) -> np.ndarray:
    v = rng.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def make_charges(curve: GeneratingCurve, problem: str, count: int = 3, seed: int = 0) -> ChargeSet:
    """内部問題は外側の球面上に、外部問題は内点まわりの球内に電荷を置く"""
    if count < 1:
        raise DomainError(f"charge_count: 1 以上が必要です (got {count})")
    rng = np.random.default_rng(seed)
    if problem == "interior":
        radius = 2.0 * bounding_radius(curve, axis_center(curve))
        center = np.array([0.0, 0.0, axis_center(curve)])
        locations = center + radius * _random_directions(rng, count)
        side = "outside"
    else:
        r0, z0 = interior_point(curve)
        radius = 0.5 * inradius(curve, (r0, z0))
        phi = rng.uniform(0.0, 2 * math.pi, size=count)
        center = np.stack([r0 * np.cos(phi), r0 * np.sin(phi), np.full(count, z0)], axis=1)
        scale = radius * rng.uniform(size=count) ** (1.0 / 3.0)
        locations = center + scale[:, None] * _random_directions(rng, count)
        side = "inside"
    strengths = rng.uniform(-1.0, 1.0, size=count)
    clearance = meridian_clearance(curve, locations)
    if not np.all(clearance > 0):
        raise DomainError("電荷が Γ 上にあります")
    logger.info(f"電荷 {count} 個 ({side}), 最小距離 {clearance.min():.3e}, seed={seed}")
    return ChargeSet(locations, strengths, side)


def fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def make_targets(curve: GeneratingCurve, problem: str, count: int = 20,
                 radius: Optional[float] = None) -> EvaluationSet:
    if count < 1:
        raise DomainError(f"eval_count: 1 以上が必要です (got {count})")
    if problem == "interior":
        r0, z0 = interior_point(curve)
        center = (r0, 0.0, z0)
        radius = 0.5 * inradius(curve, (r0, z0)) if radius is None else radius
        side = "inside"
    else:
        zc = axis_center(curve)
        center = (0.0, 0.0, zc)
        radius = 1.5 * bounding_radius(curve, zc) if radius is None else radius
        side = "outside"
    if radius <= 0:
        raise DomainError(f"eval_radius: 正の値が必要です (got {radius})")
    points = np.asarray(center) + radius * fibonacci_sphere(count)
    return EvaluationSet(points, side, center, float(radius))


# ──────────────────────────────────────────────
# 厳密解と境界データ
# ──────────────────────────────────────────────

def point_charge_potential(charges: ChargeSet, x) -> np.ndarray:
    """Σ q_k / (4π|x - y_k|)。x は (..., 3)"""
    x = np.asarray(x, dtype=float)
    dist = np.linalg.norm(x[..., None, :] - charges.locations, axis=-1)
    if np.any(dist == 0):
        raise DomainError("評価点が電荷の位置と一致しています")
    return (charges.strengths / (_FOUR_PI * dist)).sum(axis=-1)


def surface_grid(disc: Discretization, m_theta: int) -> np.ndarray:
    """(N, M_θ, 3) の曲面上の格子点"""
    theta = 2 * math.pi * np.arange(m_theta) / m_theta
    return np.stack([disc.r[:, None] * np.cos(theta), disc.r[:, None] * np.sin(theta),
                     np.broadcast_to(disc.z[:, None], (disc.node_count, m_theta))], axis=-1)


def boundary_data(charges: ChargeSet, disc: Discretization, m_theta: int) -> np.ndarray:
    """f(x_k, θ_m) を (N, M_θ) で"""
    return point_charge_potential(charges, surface_grid(disc, m_theta))


# ──────────────────────────────────────────────
# 境界外での評価
# ──────────────────────────────────────────────

def eval_double_layer_potential(sigma_grid: np.ndarray, disc: Discretization, targets,
                                problem: str = "interior", x0: Optional[tuple[float, float]] = None,
                                complete: bool = True) -> np.ndarray:
    """σ 格子 (N, M_θ) からの表現公式を targets (K, 3) で評価する"""
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n_nodes, m_theta = sigma_grid.shape
    if n_nodes != disc.node_count:
        raise ValueError(f"σ 格子の節点数 {n_nodes} が離散化 ({disc.node_count}) と一致しません")
    with_completion = problem == "exterior" and complete
    if with_completion and x0 is None:
        raise DomainError("外部問題の評価には x0 が必要です")

    clearance = meridian_clearance(disc.curve, targets)
    if np.any(clearance < disc.panel_length):
        logger.warning(f"評価点が Γ に近すぎます (最小距離 {clearance.min():.3e} < "
                       f"パネル長 {disc.panel_length:.3e})。精度は保証されません")

    theta = 2 * math.pi * np.arange(m_theta) / m_theta
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src = surface_grid(disc, m_theta).reshape(-1, 3)
    normal = np.stack([disc.n_r[:, None] * cos_t, disc.n_r[:, None] * sin_t,
                       np.broadcast_to(disc.n_z[:, None], (n_nodes, m_theta))], axis=-1).reshape(-1, 3)
    area = (disc.weights * disc.r * disc.jacobian)[:, None] * (2 * math.pi / m_theta)
    density = (area * sigma_grid).reshape(-1)
    sign = -1.0 if problem == "exterior" else 1.0
    if with_completion:
        r0, z0 = x0
        centers = np.stack([r0 * cos_t, r0 * sin_t, np.full(m_theta, z0)], axis=-1)
        centers = np.broadcast_to(centers, (n_nodes, m_theta, 3)).reshape(-1, 3)

    out = np.empty(len(targets))
    step = max(1, _EVAL_CHUNK // len(src))
    for start in range(0, len(targets), step):
        x = targets[start:start + step, None, :]
        diff = x - src
        dist = np.linalg.norm(diff, axis=-1)
        kernel = sign * np.einsum("kjc,jc->kj", diff, normal) / (_FOUR_PI * dist ** 3)
        if with_completion:
            kernel = kernel + 1.0 / (_FOUR_PI * np.linalg.norm(x - centers, axis=-1))
        out[start:start + step] = kernel @ density
    return out


# ──────────────────────────────────────────────
# 誤差指標
# ──────────────────────────────────────────────

def relative_linf_error(u_num, u_exact) -> float:
    """||u_num - u_exact||_∞ / ||u_exact||_∞"""
    u_num, u_exact = np.asarray(u_num), np.asarray(u_exact)
    if u_num.shape != u_exact.shape:
        raise ValueError(f"長さが一致しません: {u_num.shape} vs {u_exact.shape}")
    norm = np.max(np.abs(u_exact)) if u_exact.size else 0.0
    if norm == 0:
        raise DomainError("厳密解のノルムが 0 です")
    return float(np.max(np.abs(u_num - u_exact)) / norm)


def seven_point_laplacian(func: Callable[[np.ndarray], np.ndarray], x, h: float) -> np.ndarray:
    """7 点差分の Laplacian。func は (..., 3) を受け取る"""
    x = np.asarray(x, dtype=float)
    offsets = h * np.concatenate([np.eye(3), -np.eye(3)])
    stencil = x[..., None, :] + offsets
    return (func(stencil).sum(axis=-1) - 6.0 * func(x)) / h ** 2
