# -*- coding: utf-8 -*-
"""実行設定（RunConfig）の読み込みと検証。

優先順位（後勝ち）:
    dataclass の既定値 ← --config の設定ファイル ← 環境変数 AXISYM_THREADS ← --set key=value

設定ファイルは 1 行 1 項目の `key = value`。`#` 以降と空行は無視する。
`python axisym_runner.py defaults` の出力はそのまま設定ファイルとして使える。
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from errors import ConfigurationError
from modal_kernels import PATHS
from special_functions import POLICIES

logger = logging.getLogger(__name__)

THREADS_ENV = "AXISYM_THREADS"
_AUTO = ("auto", "none", "")
_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


@dataclass(frozen=True)
class RunConfig:
    curve: str = field(default="sphere", metadata={"help": "sphere / wavy_block / starfish_torus[:k=v,...] か (r,z) 点列ファイル"})
    problem: str = field(default="interior", metadata={"help": "interior / exterior"})
    n_panels: int = field(default=10, metadata={"help": "パネル数 N_P"})
    n_gauss: int = field(default=10, metadata={"help": "パネルあたりの Gauss 点数（10 のみ）"})
    fourier_modes: int = field(default=100, metadata={"help": "表の列と同じ 2N_F+1 相当（N_F = fourier_modes // 2）"})
    truncation_tol: Optional[float] = field(default=None, metadata={"help": "指定すると境界データから N_F を選ぶ（上限は fourier_modes）"})
    n_theta: Optional[int] = field(default=None, metadata={"help": "θ 方向の格子点数 M_θ（auto = 4(N_F+1) 以上の FFT 向き長さ）"})
    charge_count: int = field(default=3, metadata={"help": "厳密解用の点電荷の数"})
    charge_seed: int = field(default=0, metadata={"help": "点電荷の乱数シード"})
    eval_count: int = field(default=20, metadata={"help": "評価点の数（Fibonacci 球面）"})
    eval_radius: Optional[float] = field(default=None, metadata={"help": "評価球の半径（auto = 内部 0.5×内接半径 / 外部 1.5×外接半径）"})
    output_dir: str = field(default="output/axisym", metadata={"help": "成果物の出力先"})
    explicit_inverse: bool = field(default=False, metadata={"help": "LU の代わりに (I+A_n)^{-1} を保持する"})
    fft_oversample: int = field(default=4, metadata={"help": "FFT 経路のオーバーサンプル倍率"})
    recursion_policy: str = field(default="auto", metadata={"help": "auto / forward / backward"})
    kernel_path: str = field(default="recursion", metadata={"help": "recursion / fft / composite"})
    exterior_completion: bool = field(default=True, metadata={"help": "外部問題で 1/(4π|x-x0|) 項を加える"})
    x0: Optional[tuple[float, float]] = field(default=None, metadata={"help": "外部問題の補正点 r,z（auto = 曲線の内点）"})
    threads: int = field(default=1, metadata={"help": f"組み立て・分解のスレッド数（環境変数 {THREADS_ENV}）"})

    @property
    def n_modes(self) -> int:
        """N_F"""
        return self.fourier_modes // 2

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "RunConfig":
        if self.problem not in ("interior", "exterior"):
            raise ConfigurationError(f"problem: interior / exterior のいずれか (got {self.problem!r})")
        if self.n_gauss != 10:
            raise ConfigurationError(f"n_gauss: 10 のみ対応しています (got {self.n_gauss})")
        if self.n_panels < 1:
            raise ConfigurationError(f"n_panels: 1 以上が必要です (got {self.n_panels})")
        if self.fourier_modes < 1:
            raise ConfigurationError(f"fourier_modes: 1 以上が必要です (got {self.fourier_modes})")
        if self.truncation_tol is not None and not self.truncation_tol > 0:
            raise ConfigurationError(f"truncation_tol: 正の値が必要です (got {self.truncation_tol})")
        if self.n_theta is not None and self.n_theta < 2 * self.n_modes + 1:
            raise ConfigurationError(f"n_theta: 2N_F+1={2 * self.n_modes + 1} 以上が必要です (got {self.n_theta})")
        for key in ("charge_count", "eval_count", "fft_oversample", "threads"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key}: 1 以上が必要です (got {getattr(self, key)})")
        if self.eval_radius is not None and not self.eval_radius > 0:
            raise ConfigurationError(f"eval_radius: 正の値が必要です (got {self.eval_radius})")
        if self.recursion_policy not in POLICIES:
            raise ConfigurationError(f"recursion_policy: {'/'.join(POLICIES)} のいずれか (got {self.recursion_policy!r})")
        if self.kernel_path not in PATHS:
            raise ConfigurationError(f"kernel_path: {'/'.join(PATHS)} のいずれか (got {self.kernel_path!r})")
        if self.x0 is not None and (self.x0[0] < 0):
            raise ConfigurationError(f"x0: r ≥ 0 が必要です (got {self.x0})")
        return self


# ──────────────────────────────────────────────
# 文字列 → 値
# ──────────────────────────────────────────────

def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigurationError(f"{key}: 真偽値として解釈できません ({text!r})")


def _parse_x0(key: str, text: str) -> Optional[tuple[float, float]]:
    if text.strip().lower() in _AUTO:
        return None
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        r0, z0 = (float(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"{key}: 'auto' か 'r,z' が必要です ({text!r})")
    return r0, z0


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    if key not in _FIELD_TYPES:
        raise ConfigurationError(f"{key}: 未知の設定項目です")
    kind = _FIELD_TYPES[key]
    text = text.strip()
    if key == "x0":
        return _parse_x0(key, text)
    if kind.startswith("Optional") and text.lower() in _AUTO:
        return None
    try:
        if "bool" in kind:
            return _parse_bool(key, text)
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: 値 {text!r} を {kind} として解釈できません")
    return text


def format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(f"{v:g}" for v in value)
    return str(value)


def _assignments(lines: Iterable[str], origin: str) -> dict:
    values = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{origin}:{lineno}: 'key = value' の形式が必要です")
        values[key.strip()] = parse_value(key.strip(), value)
    return values


def load_config(path: Optional[str] = None, overrides: Iterable[str] = (),
                environ: Optional[dict] = None) -> RunConfig:
    environ = os.environ if environ is None else environ
    values = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise FileNotFoundError(f"設定ファイルが見つかりません: {config_path}")
        values.update(_assignments(config_path.read_text(encoding="utf-8").splitlines(), str(config_path)))
        logger.info(f"設定ファイルを読み込みました: {config_path}")
    if environ.get(THREADS_ENV):
        values["threads"] = parse_value("threads", environ[THREADS_ENV])
    values.update(_assignments(overrides, "--set"))
    return RunConfig(**values).validate()


def defaults_text() -> str:
    lines = ["# axisym 既定設定（python src/axisym_runner.py defaults の出力）"]
    for f in fields(RunConfig):
        lines.append(f"# {f.metadata['help']}")
        lines.append(f"{f.name} = {format_value(f.default)}")
    return "\n".join(lines) + "\n"
