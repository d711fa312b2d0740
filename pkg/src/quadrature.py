# -*- coding: utf-8 -*-
"""求積則の選択・Lagrange 補間・適応積分オラクル。

- gauss_rule()        : 10 点 Gauss-Legendre（[-1,1]）
- singular_rule(i)    : 自パネル用 20 点則。f + g·log|x_i - x| を正確に積分
- nearby_rule(xbar)   : 隣接パネル用。f + g·log(x + xbar) を [0,1] で積分
                        （埋め込み 24 点表がモーメント検算を通らなければ段階分割 Gauss 則）
- near_field_rule(i, relation)
                      : 目標節点 i と関係（self/left/right）ごとの補助節点・重み・補間行列
- lagrange_matrix()   : Gauss 節点値 → 任意点への補間行列
- adaptive_integrate(): scipy.integrate.quad を包んだ検証用オラクル

表の数値は quadrature_tables.py にそのまま埋め込んである。
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from errors import ConfigurationError, DomainError, IntegrationError
from quadrature_tables import GAUSS10, NEARBY24, SINGULAR20

logger = logging.getLogger(__name__)

N_GAUSS = 10
NEARBY_DECADES = len(NEARBY24)
RELATIONS = ("self", "left", "right")


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    interval: tuple[float, float]

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@dataclass(frozen=True)
class NearFieldRule:
    """目標節点 1 個ぶんの近接則。

    aux     : ソースパネルの参照座標 u ∈ [-1,1] 上の補助節点
    weights : h/2 を掛ければ弧長上の重みになる
    interp  : (len(aux), N_G) の Lagrange 行列（ソースパネルの Gauss 節点へ）
    """
    relation: str
    target: int
    aux: np.ndarray
    weights: np.ndarray
    interp: np.ndarray


def _rule(table, kind: str, interval: tuple[float, float]) -> QuadratureRule:
    data = np.array(table, dtype=float)
    nodes, weights = data[:, 0].copy(), data[:, 1].copy()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, kind, interval)


@lru_cache(maxsize=None)
def gauss_rule() -> QuadratureRule:
    return _rule(GAUSS10, "gauss10", (-1.0, 1.0))


@lru_cache(maxsize=None)
def singular_rule(i: int) -> QuadratureRule:
    """i 番目（1 始まり）の Gauss 節点に対数特異点を持つ 20 点則"""
    if not 1 <= i <= len(SINGULAR20):
        raise DomainError(f"singular_rule: 節点番号は 1..{len(SINGULAR20)} (got {i})")
    return _rule(SINGULAR20[i - 1], f"singular20({i})", (-1.0, 1.0))


def nearby_decade(xbar: float) -> int:
    """xbar を含む表の番号。区間の端は xbar の小さい側の表に入れる"""
    if xbar < 0:
        raise DomainError(f"nearby_rule: xbar は非負 (got {xbar})")
    if xbar > 1e-1:
        return 0
    for k in range(1, NEARBY_DECADES):
        if xbar > 10.0 ** (-(k + 1)):
            return k
    return NEARBY_DECADES - 1


@lru_cache(maxsize=None)
def _nearby_table(k: int) -> QuadratureRule:
    label = ">=1e-1" if k == 0 else f"[1e-{k + 1},1e-{k}]"
    return _rule(NEARBY24[k], f"nearby24({label})", (0.0, 1.0))


NEARBY_CHECK_TOL = 1e-12
GRADED_POINTS = 20
GRADED_RATIO = 3.0
GRADED_MIN_XBAR = 1e-15


def _log_moment(m: int, a: float) -> float:
    """∫_0^1 x^m log(x + a) dx（二項展開、m は小さい前提）"""
    def antideriv(u: float, j: int) -> float:
        return u ** (j + 1) / (j + 1) * (math.log(u) - 1.0 / (j + 1)) if u > 0 else 0.0

    return math.fsum(math.comb(m, j) * (-a) ** (m - j) * (antideriv(1.0 + a, j) - antideriv(a, j))
                     for j in range(m + 1))


def nearby_moment_residual(rule: QuadratureRule, xbar: float, degree: int = 3) -> float:
    """x^m と x^m·log(x+xbar)（m ≤ degree）の積分誤差の最大値"""
    worst = 0.0
    for m in range(degree + 1):
        poly = rule.integrate(lambda x: x ** m)
        logm = rule.integrate(lambda x: x ** m * np.log(x + xbar))
        worst = max(worst, abs(poly - 1.0 / (m + 1)), abs(logm - _log_moment(m, xbar)))
    return worst


def _decade_midpoint(k: int) -> float:
    return 0.5 if k == 0 else 10.0 ** (-(k + 0.5))


@lru_cache(maxsize=None)
def nearby_table_is_exact(k: int) -> bool:
    """表 k が低次モーメントを NEARBY_CHECK_TOL で再現するか。外れたら一度だけ警告"""
    residual = nearby_moment_residual(_nearby_table(k), _decade_midpoint(k))
    if residual > NEARBY_CHECK_TOL:
        logger.warning(f"{_nearby_table(k).kind}: モーメント誤差 {residual:.2e} のため段階分割 Gauss 則に切り替えます")
        return False
    return True


@lru_cache(maxsize=None)
def graded_rule(xbar: float) -> QuadratureRule:
    """[0,1] を x = -xbar に向けて等比に刻んだ合成 Gauss-Legendre 則。

    区切り c_{j+1} + xbar = GRADED_RATIO·(c_j + xbar) なので、各小区間は特異点から
    自分の長さの半分以上離れている。
    """
    if xbar < 0:
        raise DomainError(f"graded_rule: xbar は非負 (got {xbar})")
    a = max(float(xbar), GRADED_MIN_XBAR)
    cuts = [0.0]
    while cuts[-1] < 1.0:
        cuts.append(min(1.0, GRADED_RATIO * (cuts[-1] + a) - a))
    g, w = np.polynomial.legendre.leggauss(GRADED_POINTS)
    lo, hi = np.array(cuts[:-1])[:, None], np.array(cuts[1:])[:, None]
    nodes = (0.5 * (hi - lo) * (g + 1.0) + lo).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return _rule(np.column_stack([nodes, weights]), f"nearby-graded({len(cuts) - 1}x{GRADED_POINTS})", (0.0, 1.0))


def nearby_rule(xbar: float) -> QuadratureRule:
    """f + g·log(x + xbar) を [0,1] で積分する則。表が検算を通らなければ段階分割則を返す"""
    k = nearby_decade(xbar)
    if nearby_table_is_exact(k):
        return _nearby_table(k)
    return graded_rule(float(xbar))


def lagrange_matrix(source_nodes: Sequence[float], eval_points: Sequence[float]) -> np.ndarray:
    """entry (l, j) = L_j(eval_l)。重心形の Lagrange 補間"""
    x = np.asarray(source_nodes, dtype=float)
    s = np.atleast_1d(np.asarray(eval_points, dtype=float))
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise DomainError("lagrange_matrix: 補間節点が重複しています")
    bary = 1.0 / np.prod(diff, axis=1)

    d = s[:, None] - x[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    terms = bary[None, :] / d
    mat = terms / terms.sum(axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    if np.any(rows):
        mat[rows] = hit[rows].astype(float)
    return mat


@lru_cache(maxsize=None)
def near_field_rule(target: int, relation: str) -> NearFieldRule:
    """目標節点 target（0 始まり）から見た自パネル／隣接パネルの求積則。

    right: t̂ = a_q + x·h, xbar = (1 - g_i)/2
    left : t̂ = b_q - x·h, xbar = (1 + g_i)/2
    """
    g = gauss_rule().nodes
    if not 0 <= target < len(g):
        raise DomainError(f"near_field_rule: 節点番号 {target} は範囲外")
    if relation == "self":
        rule = singular_rule(target + 1)
        aux = rule.nodes.copy()
        weights = rule.weights.copy()
    elif relation in ("left", "right"):
        xbar = (1.0 + g[target]) / 2 if relation == "left" else (1.0 - g[target]) / 2
        # Gauss 節点は開いた則なので xbar = 0 にはならない
        assert xbar > 0.0, "near_field_rule: xbar = 0"
        rule = nearby_rule(xbar)
        aux = 2.0 * rule.nodes - 1.0 if relation == "right" else 1.0 - 2.0 * rule.nodes
        weights = 2.0 * rule.weights
    else:
        raise ConfigurationError(f"relation: self/left/right のいずれか (got {relation!r})")
    return NearFieldRule(relation, target, aux, weights, lagrange_matrix(g, aux))


def table_checksum() -> str:
    """埋め込み表の SHA-256（各値を %.15e で 1 行ずつ）"""
    lines = []
    for table in (GAUSS10, *SINGULAR20, *NEARBY24):
        for x, w in table:
            lines.append(f"{x:.15e}")
            lines.append(f"{w:.15e}")
    return hashlib.sha256(("\n".join(lines) + "\n").encode("ascii")).hexdigest()


# ──────────────────────────────────────────────
# 適応積分オラクル
# ──────────────────────────────────────────────

# full_output=1 のとき quad は ier を返さず、異常時だけ 4 番目にメッセージを付ける
_ROUNDOFF_MESSAGE = "roundoff error is detected, which prevents"
# quad は epsrel < max(50·eps, 5e-29) を受け付けない
MIN_EPSREL = 50 * np.finfo(float).eps


def adaptive_integrate(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
                       points: Optional[Sequence[float]] = None,
                       weight: Optional[str] = None, wvar: Optional[float] = None,
                       limit: int = 200) -> float:
    """∫_a^b f（weight='cos' なら ∫ f·cos(wvar·x)）を相対誤差 tol で返す。

    QUADPACK の roundoff 判定（ier=2）は警告だけ出して値を採用する。
    """
    if tol <= 0:
        raise ConfigurationError(f"tol: 正の値が必要です (got {tol})")
    if a == b:
        return 0.0

    if weight is not None and points:
        cuts = sorted({a, b, *(p for p in points if min(a, b) < p < max(a, b))})
        if a > b:
            cuts.reverse()
        return math.fsum(adaptive_integrate(f, lo, hi, tol, weight=weight, wvar=wvar, limit=limit)
                         for lo, hi in zip(cuts[:-1], cuts[1:]))

    epsrel = max(tol, MIN_EPSREL)
    if epsrel > tol:
        logger.debug(f"adaptive_integrate: tol={tol:.1e} は QUADPACK の下限未満なので {epsrel:.1e} に丸めます")
    kwargs = dict(epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1)
    if weight is not None:
        kwargs.update(weight=weight, wvar=wvar)
    elif points:
        kwargs["points"] = list(points)
    result = integrate.quad(f, a, b, **kwargs)
    value, abserr = result[0], result[1]
    message = result[3] if len(result) > 3 else ""
    if _ROUNDOFF_MESSAGE in message:
        logger.warning(f"adaptive_integrate: 丸め誤差で要求精度に届きません [{a}, {b}] abserr={abserr:.2e}")
    elif message:
        first = message.strip().splitlines()[0]
        raise IntegrationError(f"adaptive_integrate: 収束しません ({first}) [{a}, {b}] abserr={abserr:.2e}")
    return float(value)
