# -*- coding: utf-8 -*-
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from errors import ConfigurationError, DomainError
from geometry import sphere_curve
from modal_kernels import (
    BIE_SCALE,
    KernelPairGeometry,
    LaplaceKernel,
    completion_modal,
    double_layer_modal_exterior,
    double_layer_modal_interior,
    double_layer_physical,
    kernel_coeffs_adaptive,
    kernel_coeffs_composite,
    kernel_coeffs_fft,
    single_layer_modal,
    single_layer_physical,
)

NRS, NZS = 0.6, 0.8


def pair(chi: float) -> KernelPairGeometry:
    """r = r' = 1 で χ を与える対（z だけずらす）"""
    dz = math.sqrt(2.0 * (chi - 1.0))
    return KernelPairGeometry.between(1.0, 0.0, 1.0, dz, NRS, NZS)


def oracle_points(geom: KernelPairGeometry):
    width = math.sqrt(2.0 * float(geom.chi_minus_one))
    return [width, 10 * width] if width < 0.3 else None


def double_layer_oracle(geom: KernelPairGeometry, n_max: int) -> np.ndarray:
    g = geom

    def kernel(t):
        return float(double_layer_physical(g.r, g.z, g.rs, g.zs, g.nrs, g.nzs, t))

    return kernel_coeffs_adaptive(kernel, n_max, 1e-13, oracle_points(geom)).values


def test_pair_geometry_chi():
    geom = KernelPairGeometry.between(2.0, 1.0, 1.0, 0.0)
    assert float(geom.chi) == pytest.approx((4 + 1 + 1) / 4)
    assert float(geom.chi_minus_one) == pytest.approx(0.5)
    assert float(geom.mu) == pytest.approx(math.sqrt(2 / 2.5))


@pytest.mark.parametrize("r, rs", [(0.0, 1.0), (1.0, -0.5)])
def test_pair_geometry_needs_positive_radii(r, rs):
    with pytest.raises(DomainError):
        KernelPairGeometry.between(r, 0.0, rs, 0.5)


def test_dchi_dn_matches_finite_difference():
    geom = KernelPairGeometry.between(1.3, 0.2, 0.9, -0.4, NRS, NZS)
    h = 1e-6
    plus = KernelPairGeometry.between(1.3, 0.2, 0.9 + h * NRS, -0.4 + h * NZS)
    minus = KernelPairGeometry.between(1.3, 0.2, 0.9 - h * NRS, -0.4 - h * NZS)
    fd = (float(plus.chi) - float(minus.chi)) / (2 * h)
    assert float(geom.dchi_dn) == pytest.approx(fd, rel=1e-8)
    assert float(geom.dchi_dn) == pytest.approx(NRS * float(geom.dchi_drs) + NZS * float(geom.dchi_dzs), rel=1e-12)


@pytest.mark.parametrize("chi", [1.001, 1.1, 2.0, 10.0])
def test_single_layer_matches_adaptive_oracle(chi):
    geom = pair(chi)
    values = single_layer_modal(geom, 20).values

    def kernel(t):
        return float(single_layer_physical(1.0, 0.0, 1.0, float(geom.zs), t))

    oracle = kernel_coeffs_adaptive(kernel, 20, 1e-13, oracle_points(geom)).values
    np.testing.assert_allclose(values, oracle, rtol=1e-10, atol=1e-14 * abs(oracle[0]))


@pytest.mark.parametrize("chi", [1.0 + 1e-6, 1.001, 1.1, 2.0, 10.0])
def test_double_layer_matches_adaptive_oracle(chi):
    geom = pair(chi)
    values = double_layer_modal_interior(geom, 20).values
    oracle = double_layer_oracle(geom, 20)
    np.testing.assert_allclose(values, oracle, rtol=1e-10, atol=1e-13 * np.max(np.abs(oracle)))


@pytest.mark.slow
@pytest.mark.parametrize("chi", [1.0 + 1e-6, 1.001, 1.1, 2.0, 10.0])
def test_double_layer_matches_oracle_to_mode_200(chi):
    geom = pair(chi)
    started = time.perf_counter()
    oracle = double_layer_oracle(geom, 200)
    t_oracle = time.perf_counter() - started
    started = time.perf_counter()
    values = double_layer_modal_interior(geom, 200).values
    t_recursion = time.perf_counter() - started
    np.testing.assert_allclose(values, oracle, rtol=1e-10, atol=1e-13 * np.max(np.abs(oracle)))
    assert t_oracle >= 5 * t_recursion


@pytest.mark.parametrize("chi", [1.2, 2.0])
def test_fft_path_matches_recursion(chi):
    geom = pair(chi)
    kernel = LaplaceKernel(kind="interior")
    recursion = kernel.modes(geom, 12)
    fft = kernel.modes(geom, 12, path="fft")
    np.testing.assert_allclose(fft, recursion, rtol=1e-9, atol=1e-14 * np.max(np.abs(recursion)))


def test_fft_coefficients_of_pure_cosine():
    coeffs = kernel_coeffs_fft(lambda t: np.cos(3 * t), 5)
    expected = np.zeros(11, dtype=complex)
    expected[5 + 3] = expected[5 - 3] = math.sqrt(2 * math.pi) / 2
    np.testing.assert_allclose(coeffs.values, expected, atol=1e-14)
    assert coeffs.coefficient(-3) == pytest.approx(coeffs.coefficient(3))


@pytest.mark.parametrize("chi", [1.0 + 1e-6, 1.01, 3.0])
def test_composite_path_matches_recursion(chi):
    geom = pair(chi)
    kernel = LaplaceKernel(kind="interior")
    recursion = kernel.modes(geom, 30)
    composite = kernel.modes(geom, 30, path="composite")
    np.testing.assert_allclose(composite, recursion, rtol=1e-8, atol=1e-12 * np.max(np.abs(recursion)))


def test_composite_handles_arrays():
    chi = np.array([[1.01, 1.5], [2.0, 1.0001]])
    dz = np.sqrt(2.0 * (chi - 1.0))
    arrays = dict(r=1.0, z=0.0, rs=1.0, zs=dz)
    values = kernel_coeffs_composite(single_layer_physical, arrays, chi - 1.0, 6)
    assert values.shape == (7, 2, 2)
    geom = KernelPairGeometry.between(1.0, 0.0, 1.0, dz)
    np.testing.assert_allclose(values, single_layer_modal(geom, 6).values, rtol=1e-8)


def test_completion_on_axis_has_only_zero_mode():
    values = completion_modal(np.array([0.5, 1.0]), np.array([0.2, -0.3]), (0.0, 0.1), 4)
    rho = np.hypot([0.5, 1.0], [0.1, -0.4])
    np.testing.assert_allclose(values[0], 1.0 / (math.sqrt(8 * math.pi) * rho), rtol=1e-15)
    np.testing.assert_array_equal(values[1:], 0.0)


def test_completion_off_axis_is_single_layer_of_x0():
    values = completion_modal(1.0, 0.5, (0.3, 0.0), 6)
    geom = KernelPairGeometry.between(1.0, 0.5, 0.3, 0.0)
    np.testing.assert_allclose(values, single_layer_modal(geom, 6).values, rtol=1e-15)


def test_exterior_kernel_is_negated_interior_plus_completion():
    geom = pair(1.3)
    ext = double_layer_modal_exterior(geom, (0.0, 0.0), 8).values
    inner = double_layer_modal_interior(geom, 8).values
    expected = -inner + completion_modal(1.0, 0.0, (0.0, 0.0), 8)
    np.testing.assert_allclose(ext, expected, rtol=1e-15)


def test_exterior_kernel_checks_x0_inside_curve():
    geom = pair(1.3)
    with pytest.raises(ConfigurationError, match="x0"):
        double_layer_modal_exterior(geom, (0.0, 2.0), 4, curve=sphere_curve())


def test_boundary_operator_scale():
    kernel = LaplaceKernel.boundary_operator("interior")
    assert kernel.scale == BIE_SCALE
    geom = pair(1.5)
    np.testing.assert_allclose(kernel.modes(geom, 5), BIE_SCALE * double_layer_modal_interior(geom, 5).values)


def test_physical_kernel_matches_mode_sum():
    # k(θ) = (1/√(2π)) Σ_n e^{inθ} k_n
    geom = pair(2.0)
    kernel = LaplaceKernel(kind="exterior", x0=(0.2, 0.1))
    modes = kernel.modes(geom, 60)
    theta = np.array([0.0, 0.7, 2.5])
    n = np.arange(1, 61)[:, None]
    series = (modes[0] + 2 * np.sum(modes[1:, None] * np.cos(n * theta), axis=0)) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(kernel.physical(geom, theta), series, rtol=1e-10)


@pytest.mark.parametrize("kwargs, match", [
    (dict(kind="double"), "problem"),
    (dict(path="spectral"), "kernel_path"),
    (dict(policy="sideways"), "recursion_policy"),
    (dict(kind="exterior"), "x0"),
])
def test_kernel_validation(kwargs, match):
    with pytest.raises(ConfigurationError, match=match):
        LaplaceKernel(**kwargs)


def test_exterior_without_completion_needs_no_x0():
    kernel = LaplaceKernel(kind="exterior", complete=False)
    assert not kernel.completed
