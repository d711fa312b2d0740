# -*- coding: utf-8 -*-
"""モード行列 A_n の組み立て（Nyström 離散化）。

ブロック (p, q) の扱いは 3 通り:
  far         : 10 点 Gauss をそのまま使う
                A_{n;i,j} = √(2π) w_j k_n(τ_i, τ_j) r'_j |dτ_j/ds|
  self        : singular20(i) で補助節点を取り、Lagrange 補間で Gauss 節点に戻す
  left/right  : nearby_rule(xbar) で同様に（表が検算を通らなければ段階分割 Gauss 則）

近接ブロックの核は常に Legendre 漸化式（composite 指定時のみ合成 Gauss）で評価し、
補助節点の幾何は曲線そのものを評価する（補間するのは密度だけ）。
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from errors import AssemblyError, DomainError
from geometry import Discretization
from modal_kernels import KernelPairGeometry, LaplaceKernel
from quadrature import RELATIONS, near_field_rule

logger = logging.getLogger(__name__)

REGIMES = RELATIONS + ("far",)

_SQRT_2PI = math.sqrt(2 * math.pi)
_FFT_CHUNK = 4_000_000


@dataclass
class ModalSystem:
    n: int
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def operator(self) -> np.ndarray:
        """I + A_n"""
        return np.eye(self.size) + self.matrix


def block_regime(disc: Discretization, p: int, q: int) -> str:
    if p == q:
        return "self"
    for relation, neighbor in disc.neighbors(p).items():
        if neighbor == q:
            return relation
    return "far"


def _source_weights(disc: Discretization) -> np.ndarray:
    return _SQRT_2PI * disc.weights * disc.r * disc.jacobian


def _far_entries(disc: Discretization, kernel: LaplaceKernel, rows: np.ndarray,
                 cols: np.ndarray, n_max: int) -> np.ndarray:
    out = np.empty((n_max + 1, len(rows), len(cols)))
    path = kernel.far_path
    if path == "fft":
        m = kernel.oversample * (2 * n_max + 1)
        step = max(1, _FFT_CHUNK // (m * len(rows)))
    else:
        step = len(cols)
    source_w = _source_weights(disc)
    for start in range(0, len(cols), step):
        c = cols[start:start + step]
        geom = KernelPairGeometry.between(
            disc.r[rows, None], disc.z[rows, None], disc.r[None, c], disc.z[None, c],
            disc.n_r[None, c], disc.n_z[None, c])
        out[:, :, start:start + step] = kernel.modes(geom, n_max, path=path) * source_w[c]
    return out


def _pad(values: np.ndarray, width: int, fill: float) -> np.ndarray:
    return np.concatenate([values, np.full(width - len(values), fill)])


def _near_entries(disc: Discretization, kernel: LaplaceKernel, relation: str,
                  panels: np.ndarray, n_max: int) -> np.ndarray:
    """(n_max+1, len(panels), N_G, N_G)。panels は relation の相手を持つものに限る"""
    ng = disc.n_gauss
    rules = [near_field_rule(i, relation) for i in range(ng)]
    # 隣接則は目標節点ごとに点数が違うので、重み 0 の複製点で揃える
    width = max(len(rule.weights) for rule in rules)
    aux = np.stack([_pad(rule.aux, width, rule.aux[-1]) for rule in rules])
    weights = np.stack([_pad(rule.weights, width, 0.0) for rule in rules])
    interp = np.stack([np.vstack([rule.interp] + [rule.interp[-1:]] * (width - len(rule.weights)))
                       for rule in rules])

    sources = np.array([p if relation == "self" else disc.neighbors(p)[relation] for p in panels])
    h = disc.panel_length
    mid = 0.5 * (disc.breaks[sources] + disc.breaks[sources + 1])
    t_aux = mid[:, None, None] + 0.5 * h * aux[None, :, :]
    rs, zs, nrs, nzs, jac = disc.curve.evaluate(t_aux)

    rows = (panels[:, None] * ng + np.arange(ng)[None, :])[:, :, None]
    geom = KernelPairGeometry.between(disc.r[rows], disc.z[rows], rs, zs, nrs, nzs)
    bad = geom.chi_minus_one <= 0
    if np.any(bad):
        k, i, l = (int(v[0]) for v in np.nonzero(bad))
        raise AssemblyError(f"補助節点で χ ≤ 1: panel p={panels[k]}, q={sources[k]}, "
                            f"target i={i}, aux l={l} ({relation})")
    path = "composite" if kernel.path == "composite" else "recursion"
    try:
        modes = kernel.modes(geom, n_max, path=path)
    except DomainError as e:
        raise AssemblyError(f"近接ブロック ({relation}) の核評価に失敗しました: {e}") from e
    weighted = _SQRT_2PI * modes * (0.5 * h * weights) * rs * jac
    return np.einsum("npil,ilj->npij", weighted, interp)


def assemble_far_block(disc: Discretization, kernel: LaplaceKernel, p: int, q: int,
                       n_max: int) -> np.ndarray:
    """ブロック (p, q) の全モード (n_max+1, N_G, N_G)。隣接・対角は不可"""
    regime = block_regime(disc, p, q)
    if regime != "far":
        raise AssemblyError(f"ブロック ({p}, {q}) は {regime} なので far では組み立てられません")
    rows = np.arange(disc.node_count)[disc.panel_slice(p)]
    cols = np.arange(disc.node_count)[disc.panel_slice(q)]
    return _far_entries(disc, kernel, rows, cols, n_max)


def assemble_near_block(disc: Discretization, kernel: LaplaceKernel, p: int, q: int,
                        n_max: int) -> np.ndarray:
    regime = block_regime(disc, p, q)
    if regime == "far":
        raise AssemblyError(f"ブロック ({p}, {q}) は隣接していません")
    return _near_entries(disc, kernel, regime, np.array([p]), n_max)[:, 0]


def build_modal_systems(disc: Discretization, kernel: LaplaceKernel, n_max: int,
                        threads: int = 1) -> list[ModalSystem]:
    """n = 0..n_max の A_n を組み立てる（A_{-n} = A_n なので負のモードは持たない）"""
    started = time.perf_counter()
    size = disc.node_count
    matrices = np.zeros((n_max + 1, size, size))
    nodes = np.arange(size)

    def far_row(p: int) -> None:
        far = [q for q in range(disc.n_panels) if block_regime(disc, p, q) == "far"]
        if not far:
            return
        cols = np.concatenate([nodes[disc.panel_slice(q)] for q in far])
        sl = disc.panel_slice(p)
        matrices[:, sl, cols] = _far_entries(disc, kernel, nodes[sl], cols, n_max)

    def near_chunk(relation: str, panels: np.ndarray) -> None:
        blocks = _near_entries(disc, kernel, relation, panels, n_max)
        for k, p in enumerate(panels):
            q = p if relation == "self" else disc.neighbors(p)[relation]
            matrices[:, disc.panel_slice(p), disc.panel_slice(q)] = blocks[:, k]

    tasks = []
    chunk = max(1, math.ceil(disc.n_panels / max(threads, 1)))
    for relation in RELATIONS:
        panels = np.array([p for p in range(disc.n_panels)
                           if relation == "self" or relation in disc.neighbors(p)], dtype=int)
        for start in range(0, len(panels), chunk):
            tasks.append((near_chunk, relation, panels[start:start + chunk]))

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        futures = [pool.submit(far_row, p) for p in range(disc.n_panels)]
        futures += [pool.submit(fn, *args) for fn, *args in tasks]
        for f in futures:
            f.result()

    logger.info(f"A_n 組み立て完了: {n_max + 1} モード × {size}×{size} "
                f"({kernel.kind}, {kernel.path}, {time.perf_counter() - started:.2f}s)")
    return [ModalSystem(n, matrices[n]) for n in range(n_max + 1)]
