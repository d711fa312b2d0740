# -*- coding: utf-8 -*-
from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from assembly import ModalSystem, build_modal_systems
from errors import ConfigurationError, SingularSystemError
from modal_kernels import LaplaceKernel
from postprocess import boundary_data, make_charges
from solver import (
    conditioning_table,
    default_theta_count,
    factorize,
    fourier_analyze,
    fourier_synthesize,
    select_truncation,
    solve_all,
)


def random_systems(n_modes: int, size: int, seed: int = 0) -> list[ModalSystem]:
    rng = np.random.default_rng(seed)
    return [ModalSystem(n, 0.3 * rng.standard_normal((size, size)) / math.sqrt(size))
            for n in range(n_modes + 1)]


def test_default_theta_count_is_fast_and_large_enough():
    for n in (0, 5, 12, 50, 200):
        m = default_theta_count(n)
        assert m >= 4 * (n + 1)
        assert m < 4 * (n + 1) * 1.25 + 8


def test_fourier_analyze_single_cosine():
    m = 32
    theta = 2 * math.pi * np.arange(m) / m
    coeffs = fourier_analyze(np.cos(2 * theta)[None, :], 5)
    assert coeffs.shape == (6, 1)
    expected = np.zeros(6)
    expected[2] = math.sqrt(2 * math.pi) / 2
    np.testing.assert_allclose(coeffs[:, 0], expected, atol=1e-15)


def test_fourier_synthesize_inverts_analyze_for_band_limited_data():
    rng = np.random.default_rng(1)
    m, n_max = 40, 9
    theta = 2 * math.pi * np.arange(m) / m
    a = rng.standard_normal((3, n_max + 1))
    b = rng.standard_normal((3, n_max + 1))
    b[:, 0] = 0.0
    n = np.arange(n_max + 1)
    grid = a @ np.cos(n[:, None] * theta) + b @ np.sin(n[:, None] * theta)
    back = fourier_synthesize(fourier_analyze(grid, n_max), m)
    np.testing.assert_allclose(back, grid, atol=1e-13)


def test_fourier_grid_too_small():
    with pytest.raises(ConfigurationError, match="n_theta"):
        fourier_analyze(np.zeros((2, 10)), 5)


def test_select_truncation_finds_band_limit():
    m = 64
    theta = 2 * math.pi * np.arange(m) / m
    grid = np.stack([1.0 + np.cos(3 * theta), 0.5 * np.sin(2 * theta)])
    assert select_truncation(grid, 1e-12) == 3


def test_select_truncation_geometric_spectrum():
    m = 128
    theta = 2 * math.pi * np.arange(m) / m
    # e^{-n/2} の減衰: 1e-6 に届くのは n ≈ 28 前後
    grid = sum(math.exp(-0.5 * n) * np.cos(n * theta) for n in range(60))
    n_sel = select_truncation(grid[None, :], 1e-6)
    assert 24 <= n_sel <= 30


def test_select_truncation_warns_at_grid_limit(caplog):
    rng = np.random.default_rng(2)
    with caplog.at_level(logging.WARNING):
        n_sel = select_truncation(rng.standard_normal((2, 17)), 1e-14)
    assert n_sel == 8
    assert "限界" in caplog.text


def test_select_truncation_rejects_bad_tolerance():
    with pytest.raises(ConfigurationError, match="truncation_tol"):
        select_truncation(np.ones((1, 8)), 0.0)


@pytest.mark.parametrize("explicit_inverse", [False, True])
def test_solve_all_residual(explicit_inverse):
    systems = random_systems(4, 30)
    factors = factorize(systems, explicit_inverse=explicit_inverse)
    rng = np.random.default_rng(3)
    rhs = rng.standard_normal((5, 30)) + 1j * rng.standard_normal((5, 30))
    sol = solve_all(factors, rhs)
    for s, x, f in zip(systems, sol, rhs):
        residual = np.linalg.norm(s.operator() @ x - f) / np.linalg.norm(f)
        assert residual <= 1e-12


def test_modes_are_decoupled():
    systems = random_systems(3, 12)
    factors = factorize(systems)
    rhs = np.zeros((4, 12))
    rhs[2] = np.arange(12.0)
    sol = solve_all(factors, rhs)
    np.testing.assert_array_equal(sol[[0, 1, 3]], 0.0)
    np.testing.assert_allclose(systems[2].operator() @ sol[2], rhs[2], atol=1e-12)


def test_factors_are_reused_bit_identically():
    factors = factorize(random_systems(2, 10))
    rhs = np.random.default_rng(4).standard_normal((3, 10))
    first = solve_all(factors, rhs)
    second = solve_all(factors, rhs)
    np.testing.assert_array_equal(first, second)


def test_multiple_columns_match_single_solves():
    factors = factorize(random_systems(1, 8))
    rhs = np.random.default_rng(5).standard_normal((2, 8, 3))
    block = solve_all(factors, rhs)
    for k in range(3):
        np.testing.assert_allclose(block[:, :, k], solve_all(factors, rhs[:, :, k]), rtol=1e-14, atol=1e-15)


def test_singular_mode_is_reported():
    systems = random_systems(2, 6)
    systems[1] = ModalSystem(1, -np.eye(6))
    with pytest.raises(SingularSystemError) as excinfo:
        factorize(systems)
    assert excinfo.value.mode == 1


def test_solve_all_checks_mode_count():
    factors = factorize(random_systems(2, 5))
    with pytest.raises(ValueError, match="モード数"):
        solve_all(factors, np.zeros((2, 5)))


def test_threads_give_identical_solutions():
    systems = random_systems(5, 20)
    rhs = np.random.default_rng(6).standard_normal((6, 20))
    serial = solve_all(factorize(systems), rhs)
    parallel = solve_all(factorize(systems, threads=3), rhs, threads=3)
    np.testing.assert_array_equal(serial, parallel)


def test_rcond_is_recorded():
    factors = factorize([ModalSystem(0, np.zeros((4, 4)))])
    assert factors[0].rcond == pytest.approx(1.0)


def test_sphere_conditioning_trends_to_one(sphere_disc):
    systems = build_modal_systems(sphere_disc, LaplaceKernel.boundary_operator("interior"), 12)
    rows = conditioning_table(systems)
    cond = [row["cond"] for row in rows]
    assert all(np.isfinite(cond))
    assert all(c < 10 for c in cond)
    assert cond[-1] < cond[1]
    assert rows[0]["sigma_max"] >= rows[0]["sigma_min"] > 0


def test_sphere_modes_solve_to_small_residual(sphere, sphere_disc_fine):
    n_max = 24
    systems = build_modal_systems(sphere_disc_fine, LaplaceKernel.boundary_operator("interior"), n_max)
    grid = boundary_data(make_charges(sphere, "interior", seed=1), sphere_disc_fine, default_theta_count(n_max))
    rhs = fourier_analyze(grid, n_max)
    sol = solve_all(factorize(systems), rhs)
    for s, x, f in zip(systems, sol, rhs):
        residual = np.linalg.norm(s.operator() @ x - f) / np.linalg.norm(f)
        assert residual <= 1e-12, f"n={s.n}"
