# -*- coding: utf-8 -*-
"""生成曲線（回転面の母線）と弧長パネル分割。

曲線は弧長 t ∈ [0, T] でパラメータ付けする。解析的に弧長で書けない曲線
（wavy_block・starfish_torus・点列スプライン）は ArcLengthMap で弧長に引き直す。

曲線指定（curve_from_spec）:
    sphere                          半径 1 の球（開曲線、両端が軸上）
    sphere:radius=2
    wavy_block:amplitude=0.05,lobes=8
    starfish_torus:major=2,minor=0.5,eps=0.25,arms=5
    path/to/curve.txt               1 行 1 点の (r, z) 点列
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from errors import ConfigurationError, DomainError
from quadrature import N_GAUSS, adaptive_integrate, gauss_rule

logger = logging.getLogger(__name__)

CurveFunction = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

_ORIENTATION_SAMPLES = 4000
_AXIS_TOL = 1e-10


@dataclass(frozen=True)
class CurvePoint:
    r: float
    z: float
    n_r: float
    n_z: float
    jacobian: float = 1.0


class ArcLengthMap:
    """元のパラメータ u と弧長 t の対応。

    区切り点ごとの累積弧長は adaptive_integrate、区間内の逆写像は
    20 点 Gauss の部分積分を使った Newton 法で求める。
    """

    _GAUSS20 = np.polynomial.legendre.leggauss(20)

    def __init__(self, derivative: CurveFunction, breaks: np.ndarray, tol: float = 1e-12):
        self._derivative = derivative
        self.breaks = np.asarray(breaks, dtype=float)
        seg = [adaptive_integrate(lambda u: float(self.speed(u)), a, b, tol)
               for a, b in zip(self.breaks[:-1], self.breaks[1:])]
        self.segments = np.array(seg)
        self.cumulative = np.concatenate([[0.0], np.cumsum(self.segments)])
        self.length = float(self.cumulative[-1])

    def speed(self, u):
        dr, dz = self._derivative(u)
        return np.hypot(dr, dz)

    def _partial(self, k: np.ndarray, u: np.ndarray) -> np.ndarray:
        x, w = self._GAUSS20
        a = self.breaks[k]
        half = (u - a) / 2
        nodes = a[:, None] + half[:, None] * (1.0 + x[None, :])
        return half * (self.speed(nodes) @ w)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        k = np.clip(np.searchsorted(self.cumulative, flat, side="right") - 1, 0, len(self.segments) - 1)
        lo, hi = self.breaks[k], self.breaks[k + 1]
        u = lo + (flat - self.cumulative[k]) / self.segments[k] * (hi - lo)
        for _ in range(50):
            residual = self.cumulative[k] + self._partial(k, u) - flat
            u = np.clip(u - residual / self.speed(u), lo, hi)
            if np.max(np.abs(residual), initial=0.0) <= 1e-15 * self.length:
                break
        return u.reshape(t.shape)


class GeneratingCurve:
    """弧長パラメータ付きの母線 γ(t) = (r(t), z(t))。

    position / derivative は元のパラメータ u の関数。arclength が None なら
    u がそのまま弧長。
    """

    def __init__(self, name: str, position: CurveFunction, derivative: CurveFunction,
                 length: float, closed: bool, arclength: Optional[ArcLengthMap] = None):
        self.name = name
        self.length = float(length)
        self.closed = closed
        self._position = position
        self._derivative = derivative
        self._arclength = arclength
        self.orientation = self._orientation()

    def __repr__(self) -> str:
        kind = "closed" if self.closed else "open"
        return f"GeneratingCurve({self.name!r}, T={self.length:.6g}, {kind})"

    def _parameter(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * self.length
        if np.any(t < -slack) or np.any(t > self.length + slack):
            raise DomainError(f"{self.name}: t は [0, {self.length:.6g}] の範囲が必要です")
        t = np.clip(t, 0.0, self.length)
        return t if self._arclength is None else self._arclength(t)

    def position(self, t) -> tuple[np.ndarray, np.ndarray]:
        return self._position(self._parameter(t))

    def derivative(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(dr/dt, dz/dt)。弧長パラメータなので単位ベクトル"""
        u = self._parameter(t)
        dr, dz = self._derivative(u)
        if self._arclength is not None:
            speed = np.hypot(dr, dz)
            dr, dz = dr / speed, dz / speed
        return dr, dz

    def evaluate(self, t) -> tuple[np.ndarray, ...]:
        """(r, z, n_r, n_z, jacobian) を配列で返す"""
        u = self._parameter(t)
        r, z = self._position(u)
        dr, dz = self._derivative(u)
        speed = np.hypot(dr, dz)
        if self._arclength is not None:
            dr, dz = dr / speed, dz / speed
            speed = np.hypot(dr, dz)
        n_r = self.orientation * dz / speed
        n_z = -self.orientation * dr / speed
        return r, z, n_r, n_z, speed

    def samples(self, count: int = _ORIENTATION_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
        return self.position(np.linspace(0.0, self.length, count + 1))

    def _orientation(self) -> int:
        # 開曲線は軸に沿って閉じる（r=0 の辺は面積に寄与しない）
        r, z = self._position(self._parameter(np.linspace(0.0, self.length, _ORIENTATION_SAMPLES + 1)))
        area = 0.5 * float(np.sum(r[:-1] * z[1:] - r[1:] * z[:-1]) + (r[-1] * z[0] - r[0] * z[-1]))
        if area == 0.0:
            raise ConfigurationError(f"curve: {self.name} の囲む面積が 0 です")
        return 1 if area > 0 else -1


def eval_curve(curve: GeneratingCurve, t: float) -> CurvePoint:
    r, z, n_r, n_z, jac = curve.evaluate(np.array([t]))
    return CurvePoint(float(r[0]), float(z[0]), float(n_r[0]), float(n_z[0]), float(jac[0]))


def surface_point(r, z, theta) -> np.ndarray:
    r, z, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, z, theta)))
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)


# ──────────────────────────────────────────────
# パネル分割
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class Discretization:
    """等長パネル × 各 N_G 個の Gauss 節点。配列はパネル優先の並び"""
    curve: GeneratingCurve
    n_panels: int
    n_gauss: int
    panel_length: float
    breaks: np.ndarray
    t: np.ndarray
    weights: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n_r: np.ndarray
    n_z: np.ndarray
    jacobian: np.ndarray

    @property
    def node_count(self) -> int:
        return self.n_panels * self.n_gauss

    def panel_slice(self, p: int) -> slice:
        return slice(p * self.n_gauss, (p + 1) * self.n_gauss)

    def neighbors(self, p: int) -> dict[str, int]:
        """隣接パネル。閉曲線は端で巻き戻る"""
        out = {}
        if p > 0 or self.curve.closed:
            out["left"] = (p - 1) % self.n_panels
        if p < self.n_panels - 1 or self.curve.closed:
            out["right"] = (p + 1) % self.n_panels
        return out

    def point(self, k: int) -> CurvePoint:
        return CurvePoint(float(self.r[k]), float(self.z[k]), float(self.n_r[k]),
                          float(self.n_z[k]), float(self.jacobian[k]))


def build_discretization(curve: GeneratingCurve, n_panels: int, n_gauss: int = N_GAUSS) -> Discretization:
    if n_gauss != N_GAUSS:
        raise ConfigurationError(f"n_gauss: 埋め込み求積表は N_G={N_GAUSS} 専用です (got {n_gauss})")
    if n_panels < 1:
        raise ConfigurationError(f"n_panels: 1 以上が必要です (got {n_panels})")
    if curve.closed and n_panels < 3:
        raise ConfigurationError(f"n_panels: 閉曲線では 3 以上が必要です (got {n_panels})")

    rule = gauss_rule()
    h = curve.length / n_panels
    breaks = np.linspace(0.0, curve.length, n_panels + 1)
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    t = (mid[:, None] + 0.5 * h * rule.nodes[None, :]).ravel()
    weights = np.tile(0.5 * h * rule.weights, n_panels)
    r, z, n_r, n_z, jac = curve.evaluate(t)
    return Discretization(curve, n_panels, n_gauss, h, breaks, t, weights, r, z, n_r, n_z, jac)


# ──────────────────────────────────────────────
# 組み込み曲線
# ──────────────────────────────────────────────

def sphere_curve(radius: float = 1.0) -> GeneratingCurve:
    if radius <= 0:
        raise ConfigurationError(f"curve: radius は正の値 (got {radius})")

    def position(u):
        return radius * np.sin(u / radius), radius * np.cos(u / radius)

    def derivative(u):
        return np.cos(u / radius), -np.sin(u / radius)

    return GeneratingCurve(f"sphere(radius={radius:g})", position, derivative,
                           math.pi * radius, closed=False)


def wavy_block_curve(amplitude: float = 0.05, lobes: int = 8) -> GeneratingCurve:
    """軸から軸へ回る角ばった母線 ρ(φ) = (cos⁴φ + sin⁴φ)^(-1/4)·(1 + a·cos kφ)"""
    if not 0 <= abs(amplitude) < 1:
        raise ConfigurationError(f"curve: amplitude は |a| < 1 (got {amplitude})")
    lobes = int(lobes)

    def rho(phi):
        g = np.cos(phi) ** 4 + np.sin(phi) ** 4
        wave = 1.0 + amplitude * np.cos(lobes * phi)
        drho = (g ** -1.25 * np.sin(4 * phi) * wave / 4
                - amplitude * lobes * g ** -0.25 * np.sin(lobes * phi))
        return g ** -0.25 * wave, drho

    def position(phi):
        p, _ = rho(phi)
        return p * np.sin(phi), p * np.cos(phi)

    def derivative(phi):
        p, dp = rho(phi)
        return dp * np.sin(phi) + p * np.cos(phi), dp * np.cos(phi) - p * np.sin(phi)

    amap = ArcLengthMap(derivative, np.linspace(0.0, math.pi, 8 * max(lobes, 4) + 1))
    return GeneratingCurve(f"wavy_block(amplitude={amplitude:g},lobes={lobes})", position,
                           derivative, amap.length, closed=False, arclength=amap)


def starfish_torus_curve(major: float = 2.0, minor: float = 0.5, eps: float = 0.25,
                         arms: int = 5) -> GeneratingCurve:
    """星形断面のトーラス r = R + a(φ)cos φ, z = a(φ) sin φ, a = a₀(1 + ε cos mφ)"""
    arms = int(arms)
    if minor <= 0 or major - minor * (1 + abs(eps)) <= 0:
        raise ConfigurationError("curve: starfish_torus は major > minor·(1+|eps|) > 0 が必要です")

    def position(phi):
        a = minor * (1.0 + eps * np.cos(arms * phi))
        return major + a * np.cos(phi), a * np.sin(phi)

    def derivative(phi):
        a = minor * (1.0 + eps * np.cos(arms * phi))
        da = -minor * eps * arms * np.sin(arms * phi)
        return da * np.cos(phi) - a * np.sin(phi), da * np.sin(phi) + a * np.cos(phi)

    amap = ArcLengthMap(derivative, np.linspace(0.0, 2 * math.pi, 16 * max(arms, 4) + 1))
    return GeneratingCurve(f"starfish_torus(major={major:g},minor={minor:g},eps={eps:g},arms={arms})",
                           position, derivative, amap.length, closed=True, arclength=amap)


def curve_from_samples(path) -> GeneratingCurve:
    """(r, z) 点列ファイルから 3 次スプライン曲線を作る。

    先頭と末尾が一致すれば閉曲線（周期スプライン）、そうでなければ
    両端が軸上（r = 0）の開曲線として扱う。
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"曲線ファイルが見つかりません: {path}")

    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in re.split(r"[,\s]+", line) if f]
        try:
            r, z = (float(f) for f in fields)
        except ValueError:
            raise ConfigurationError(f"curve: {path}:{lineno} は 'r z' の 2 数値が必要です")
        rows.append((r, z))
    pts = np.array(rows, dtype=float)
    if len(pts) < 4:
        raise ConfigurationError(f"curve: {path} の点数が足りません（4 点以上）")

    scale = max(float(np.ptp(pts[:, 0])), float(np.ptp(pts[:, 1])), 1.0)
    closed = bool(np.hypot(*(pts[0] - pts[-1])) <= _AXIS_TOL * scale)
    if closed:
        pts[-1] = pts[0]
        inner = pts[:-1, 0]
    else:
        if abs(pts[0, 0]) > _AXIS_TOL or abs(pts[-1, 0]) > _AXIS_TOL:
            raise ConfigurationError(f"curve: {path} の開曲線は両端が軸上 (r=0) である必要があります")
        pts[0, 0] = pts[-1, 0] = 0.0
        inner = pts[1:-1, 0]
    if np.any(inner <= 0):
        raise ConfigurationError(f"curve: {path} に r <= 0 の点があります")

    chord = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(chord == 0):
        raise ConfigurationError(f"curve: {path} に重複点があります")
    u = np.concatenate([[0.0], np.cumsum(chord)])
    if closed:
        rs = CubicSpline(u, pts[:, 0], bc_type="periodic")
        zs = CubicSpline(u, pts[:, 1], bc_type="periodic")
    else:
        rs = CubicSpline(u, pts[:, 0], bc_type="not-a-knot")
        zs = CubicSpline(u, pts[:, 1], bc_type=((1, 0.0), (1, 0.0)))
    drs, dzs = rs.derivative(), zs.derivative()

    def position(v):
        return rs(v), zs(v)

    def derivative(v):
        return drs(v), dzs(v)

    mids = 0.5 * (u[:-1] + u[1:])
    amap = ArcLengthMap(derivative, np.sort(np.concatenate([u, mids])))
    logger.info(f"曲線ファイルを読み込みました: {path} ({len(pts)} 点, {'閉' if closed else '開'}曲線)")
    return GeneratingCurve(path.name, position, derivative, amap.length, closed=closed, arclength=amap)


_BUILTINS = {
    "sphere": sphere_curve,
    "wavy_block": wavy_block_curve,
    "starfish_torus": starfish_torus_curve,
}


def curve_from_spec(spec: str) -> GeneratingCurve:
    name, _, params = spec.strip().partition(":")
    if name not in _BUILTINS:
        if Path(spec).suffix or "/" in spec or Path(spec).exists():
            return curve_from_samples(spec)
        raise ConfigurationError(f"curve: 未知の曲線 {spec!r}（{', '.join(_BUILTINS)} かファイルパス）")
    kwargs = {}
    for item in filter(None, (p.strip() for p in params.split(","))):
        key, sep, value = item.partition("=")
        try:
            kwargs[key.strip()] = float(value)
        except ValueError:
            raise ConfigurationError(f"curve: パラメータ {item!r} は key=数値 の形式が必要です")
        if not sep:
            raise ConfigurationError(f"curve: パラメータ {item!r} は key=数値 の形式が必要です")
    try:
        return _BUILTINS[name](**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"curve: {name} のパラメータが不正です ({e})")


# ──────────────────────────────────────────────
# 子午面での補助量（電荷・評価点の配置、x0 の既定値）
# ──────────────────────────────────────────────

def _polygon(curve: GeneratingCurve) -> tuple[np.ndarray, np.ndarray]:
    r, z = curve.samples()
    if not curve.closed:
        r = np.concatenate([r, [r[0]]])
        z = np.concatenate([z, [z[0]]])
    return r, z


def axis_center(curve: GeneratingCurve) -> float:
    _, z = curve.samples()
    return 0.5 * float(z.min() + z.max())


def interior_point(curve: GeneratingCurve) -> tuple[float, float]:
    """開曲線は軸上の中点、閉曲線は断面の図心"""
    if not curve.closed:
        _, zz = curve.position(np.array([0.0, curve.length]))
        return 0.0, 0.5 * float(zz[0] + zz[1])
    r, z = _polygon(curve)
    cross = r[:-1] * z[1:] - r[1:] * z[:-1]
    area = 0.5 * cross.sum()
    return (float(((r[:-1] + r[1:]) * cross).sum() / (6 * area)),
            float(((z[:-1] + z[1:]) * cross).sum() / (6 * area)))


def contains_point(curve: GeneratingCurve, r0: float, z0: float) -> bool:
    """子午面で (r0, z0) が曲線の囲む領域の真に内側か"""
    if not curve.closed and r0 == 0.0:
        _, zz = curve.position(np.array([0.0, curve.length]))
        lo, hi = sorted(float(v) for v in zz)
        return lo < z0 < hi
    r, z = _polygon(curve)
    r1, z1, r2, z2 = r[:-1], z[:-1], r[1:], z[1:]
    straddle = (z1 > z0) != (z2 > z0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_cross = r1 + (z0 - z1) * (r2 - r1) / (z2 - z1)
    return bool(np.count_nonzero(straddle & (r0 < r_cross)) % 2)


def inradius(curve: GeneratingCurve, point: tuple[float, float]) -> float:
    r, z = curve.samples()
    return float(np.min(np.hypot(r - point[0], z - point[1])))


def bounding_radius(curve: GeneratingCurve, z_center: float) -> float:
    r, z = curve.samples()
    return float(np.max(np.hypot(r, z - z_center)))
