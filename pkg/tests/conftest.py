# -*- coding: utf-8 -*-
"""共通フィクスチャ。src/ を import パスに入れ、slow マーカーを登録する"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from geometry import build_discretization, sphere_curve  # noqa: E402
from run_config import RunConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 大きな格子での実行（数十秒以上）")


@pytest.fixture(scope="session")
def sphere():
    return sphere_curve(1.0)


@pytest.fixture(scope="session")
def sphere_disc(sphere):
    return build_discretization(sphere, 4)


@pytest.fixture(scope="session")
def sphere_disc_fine(sphere):
    return build_discretization(sphere, 10)


@pytest.fixture
def small_config(tmp_path):
    return RunConfig(n_panels=4, fourier_modes=16, eval_count=8, output_dir=str(tmp_path / "out"))
