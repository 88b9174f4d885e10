import math

import numpy as np
import pytest
from conftest import REFERENCE_LAMBDAS, REFERENCE_PHI0_SQ
from scipy import integrate
from scipy.special import j0

from tripod_mzi.kernel import (
    THREADS_ENV,
    DegenerateKernelError,
    FullCycleKernel,
    KernelConfig,
    compute_full_cycle,
    compute_write_kernel,
    full_cycle_direct,
    kernel_imaginary_residual,
    orthonormality_residuals,
    phi_zero_frequency,
    reconstruction_error,
    schmidt_decompose,
    worker_count,
    write_kernel_values,
)

# G_ab(t, z) from mpmath quadrature at 30 digits with mpmath's besselj
MPMATH_GAB = [
    (1.0, 0.5, 0.74065706820890405916),
    (2.0, 3.0, 0.12430057662889773083),
    (5.5, 10.0, 0.21301230504209552547),
    (4.0, 7.25, 0.20187260004428245236),
]


@pytest.mark.parametrize("t, z, expected", MPMATH_GAB)
def test_write_kernel_point_values(t, z, expected):
    assert write_kernel_values([t], [z])[0, 0] == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("t, z", [(0.3, 1.0), (3.3, 6.0), (5.5, 0.0)])
def test_write_kernel_against_scipy_quad(t, z):
    f = lambda s: math.cos(t - 2 * s) * j0(math.sqrt(z * s)) * j0(math.sqrt(z * (t - s)))
    ref, _ = integrate.quad(f, 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert write_kernel_values([t], [z])[0, 0] == pytest.approx(ref, abs=1e-12)


def test_write_kernel_reduces_to_sine_at_entrance():
    t = np.linspace(0.0, 5.5, 57)
    vals = write_kernel_values(t, [0.0])[:, 0]
    assert np.max(np.abs(vals - np.sin(t))) < 1e-13


def test_write_kernel_vanishes_at_t_zero():
    assert np.all(write_kernel_values([0.0], [0.0, 1.0, 10.0]) == 0.0)


def test_write_kernel_z_derivative_at_entrance():
    # d/dz of the integrand at z = 0: -(1/4) int cos(t - 2s) t ds = -(t/4) sin t
    t = np.array([1.0, 2.5, 4.0])
    h = 1e-5
    deriv = (write_kernel_values(t, [h])[:, 0] - write_kernel_values(t, [0.0])[:, 0]) / h
    assert np.allclose(deriv, -0.25 * t * np.sin(t), atol=1e-4)


def test_imaginary_part_cancels():
    cfg = KernelConfig(n_t=32, n_z=32, n_inner=64)
    assert kernel_imaginary_residual(cfg) < 1e-13


def test_write_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        write_kernel_values([-1.0], [1.0])
    with pytest.raises(ValueError):
        write_kernel_values([1.0], [1.0], part="tan")


def test_thread_count_does_not_change_values():
    t = np.linspace(0.1, 5.5, 50)
    z = np.linspace(0.0, 10.0, 40)
    one = write_kernel_values(t, z, 64, workers=1)
    many = write_kernel_values(t, z, 64, workers=4)
    assert np.array_equal(one, many)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(THREADS_ENV, "0")
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_ENV, "lots")
    assert worker_count() >= 1


@pytest.mark.parametrize(
    "kwargs",
    [dict(t_w=-1.0), dict(l=0.0), dict(t_w=float("nan")), dict(n_t=4), dict(n_inner=7.5)],
)
def test_kernel_config_validation(kwargs):
    with pytest.raises(ValueError):
        KernelConfig(**kwargs)


def test_full_cycle_symmetric_and_psd(small_solution):
    _, fck, _ = small_solution
    assert np.array_equal(fck.values, fck.values.T)
    assert np.linalg.eigvalsh(fck.values).min() > -1e-12


def test_direct_full_cycle_agrees_with_matrix_product():
    cfg = KernelConfig(n_t=32, n_z=64, n_inner=64)
    wk = compute_write_kernel(cfg)
    fck = compute_full_cycle(wk)
    direct = full_cycle_direct(cfg, n_t=32)
    assert np.max(np.abs(direct.values - fck.values)) < 1e-12
    assert np.max(np.abs(direct.values - direct.values.T)) < 1e-12


def test_full_cycle_entrance_slice():
    # with L -> 0 only the z = 0 column matters: G ~ (L/2) sin t sin t'
    cfg = KernelConfig(t_w=3.0, l=1e-6, n_t=16, n_z=8, n_inner=32)
    fck = compute_full_cycle(compute_write_kernel(cfg))
    t = fck.t_grid.nodes
    assert np.allclose(fck.values, 0.5e-6 * np.outer(np.sin(t), np.sin(t)), rtol=1e-5, atol=0)


def test_reference_spectrum(default_basis):
    lam = default_basis.lambdas
    assert np.allclose(lam[:4], REFERENCE_LAMBDAS, rtol=1e-9, atol=1e-12)
    phi0 = [phi_zero_frequency(default_basis, i) ** 2 for i in range(4)]
    assert np.allclose(phi0, REFERENCE_PHI0_SQ, atol=1e-9)


def test_basis_structure(default_solution):
    wk, fck, basis = default_solution
    assert np.all(np.diff(basis.lambdas) <= 0)
    assert np.all((basis.lambdas >= 0) & (basis.lambdas <= 1 + 1e-6))
    assert np.array_equal(basis.mu, np.sqrt(4.0 * basis.lambdas))
    assert np.all(basis.phi[0] >= 0)
    res_phi, res_g = orthonormality_residuals(basis)
    assert max(res_phi, res_g) < 1e-10
    assert reconstruction_error(fck, basis) < 1e-6
    assert np.all(basis.discarded < 1e-6 * basis.lambdas[0])


def test_schmidt_relations(default_solution):
    wk, fck, basis = default_solution
    w_t = basis.t_grid.weights
    # G phi_i = sqrt(lambda_i) phi_i
    lhs = fck.values @ (w_t[:, None] * basis.phi)
    assert np.allclose(lhs, basis.phi * basis.sqrt_lambdas, atol=1e-10)
    # the write kernel maps phi_i onto sqrt(mu_i) g_i
    proj = wk.values.T @ (w_t[:, None] * basis.phi)
    assert np.allclose(proj, basis.g * np.sqrt(basis.mu), atol=1e-10)


def test_interpolated_modes(default_basis):
    t = default_basis.t_grid.nodes
    assert np.allclose(default_basis.phi_at(t), default_basis.phi, atol=1e-10)
    z = default_basis.z_grid.nodes
    assert np.allclose(default_basis.g_at(z, 0), default_basis.g[:, 0], atol=1e-10)
    assert default_basis.phi_at(np.array([0.0]), 0)[0] == pytest.approx(0.0, abs=1e-8)


def test_grid_convergence(default_basis):
    from tripod_mzi.kernel import solve

    _, _, coarse = solve(KernelConfig(n_t=96, n_z=96, n_inner=96))
    assert np.allclose(coarse.lambdas[:3], default_basis.lambdas[:3], rtol=1e-8)


def test_rank_tolerance_controls_retained_modes(small_solution):
    wk, fck, _ = small_solution
    assert schmidt_decompose(fck, wk, rank_tol=0.5).n_modes < schmidt_decompose(fck, wk, rank_tol=1e-6).n_modes
    with pytest.raises(DegenerateKernelError):
        schmidt_decompose(fck, wk, rank_tol=2.0)
    with pytest.raises(ValueError):
        schmidt_decompose(fck, wk, rank_tol=0.0)


def test_zero_kernel_is_degenerate(small_solution):
    wk, fck, _ = small_solution
    zero = FullCycleKernel(fck.t_grid, np.zeros_like(fck.values))
    with pytest.raises(DegenerateKernelError):
        schmidt_decompose(zero, wk)


def test_lambda_above_one_is_rejected(small_solution):
    wk, fck, _ = small_solution
    inflated = FullCycleKernel(fck.t_grid, 3.0 * fck.values)
    with pytest.raises(ArithmeticError, match="exceeds unity"):
        schmidt_decompose(inflated, wk)


def test_mismatched_grids_rejected(small_solution, default_solution):
    wk, _, _ = small_solution
    _, fck, _ = default_solution
    with pytest.raises(ValueError):
        schmidt_decompose(fck, wk)


def test_phi_zero_frequency_index(default_basis):
    with pytest.raises(IndexError):
        phi_zero_frequency(default_basis, default_basis.n_modes)
