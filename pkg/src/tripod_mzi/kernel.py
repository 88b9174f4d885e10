"""Memory kernels and their Schmidt decomposition.

All quantities are dimensionless: time in units of the inverse Rabi frequency
of the driving field and length in units of ``Omega / (2 g^2 N)``.

The write kernel is the causal convolution

    G_ab(t, z) = int_0^t dt' cos(t - 2t') J0(sqrt(z t')) J0(sqrt(z (t - t')))

(the sine part of the complex phase cancels under ``t' -> t - t'``), the
full-cycle kernel for backward retrieval is

    G(t, t') = 1/2 int_0^L dz G_ab(t, z) G_ab(t', z),

and the Schmidt modes come from the Nystrom discretisation of
``sqrt(lambda_i) phi_i(t) = int G(t, t') phi_i(t') dt'``.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import (
    QuadratureGrid,
    bessel_j0,
    gauss_legendre,
    legendre_coefficients,
    legendre_evaluate,
    symmetric_eig,
)

log = logging.getLogger(__name__)

THREADS_ENV = "TRIPOD_MZI_THREADS"
# J0 evaluations per worker chunk; bounds peak memory of the kernel fill.
_CHUNK_EVALS = 2_000_000


class DegenerateKernelError(ArithmeticError):
    """Raised when a kernel has no eigenvalue above the rank tolerance."""


@dataclass(frozen=True)
class KernelConfig:
    t_w: float = 5.5
    l: float = 10.0
    n_t: int = 256
    n_z: int = 256
    n_inner: int = 128

    def __post_init__(self):
        for name in ("t_w", "l"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        for name in ("n_t", "n_z", "n_inner"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 8:
                raise ValueError(f"{name} must be an integer >= 8, got {value!r}")


@dataclass(frozen=True)
class WriteKernel:
    config: KernelConfig
    t_grid: QuadratureGrid
    z_grid: QuadratureGrid
    values: np.ndarray  # values[i, j] = G_ab(t_i, z_j)


@dataclass(frozen=True)
class FullCycleKernel:
    t_grid: QuadratureGrid
    values: np.ndarray


@dataclass
class SchmidtBasis:
    """Retained Schmidt modes of the memory kernel.

    ``phi[:, i]`` and ``g[:, i]`` hold the temporal and spatial mode ``i``
    sampled on ``t_grid`` and ``z_grid``; both sets are orthonormal with
    respect to the quadrature weights.
    """

    lambdas: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    mu: np.ndarray
    t_grid: QuadratureGrid
    z_grid: QuadratureGrid
    config: KernelConfig | None = None
    discarded: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)

    @property
    def sqrt_lambdas(self) -> np.ndarray:
        return np.sqrt(self.lambdas)

    @cached_property
    def _phi_coefs(self) -> np.ndarray:
        return legendre_coefficients(self.t_grid, self.phi)

    @cached_property
    def _g_coefs(self) -> np.ndarray:
        return legendre_coefficients(self.z_grid, self.g)

    def phi_at(self, t, modes=None) -> np.ndarray:
        """Temporal modes at arbitrary times in ``[0, T_W]``; shape ``(len(t), n)``."""
        out = legendre_evaluate(self.t_grid, self._phi_coefs, t)
        return out if modes is None else out[..., modes]

    def g_at(self, z, modes=None) -> np.ndarray:
        """Spatial modes at arbitrary positions in ``[0, L]``; shape ``(len(z), n)``."""
        out = legendre_evaluate(self.z_grid, self._g_coefs, z)
        return out if modes is None else out[..., modes]


def worker_count() -> int:
    """Worker threads for kernel fills, capped by ``TRIPOD_MZI_THREADS``."""
    default = min(4, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        cap = int(raw)
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return default
    return max(1, cap)


def _kernel_block(t, z, u, wu, part):
    # arguments sqrt(z t u); the mirrored Gauss nodes give u[::-1] == 1 - u to rounding
    j = bessel_j0(np.sqrt(np.multiply.outer(np.multiply.outer(t, z), u)))
    prod = j * j[..., ::-1]
    angle = np.multiply.outer(t, 1.0 - 2.0 * u)
    phase = np.cos(angle) if part == "cos" else -np.sin(angle)
    return t[:, None] * np.einsum("tzk,tk,k->tz", prod, phase, wu)


def write_kernel_values(t, z, n_inner: int = 128, part: str = "cos", workers: int | None = None) -> np.ndarray:
    """Evaluate ``G_ab`` on the outer product of ``t`` and ``z`` points.

    The inner convolution over ``[0, t]`` uses an ``n_inner``-point
    Gauss-Legendre rule per cell. ``part="sin"`` returns the imaginary part of
    the complex integrand instead, which must vanish to rounding.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(t < 0) or np.any(z < 0):
        raise ValueError("write kernel is defined for t >= 0, z >= 0")
    if part not in ("cos", "sin"):
        raise ValueError(f"unknown kernel part {part!r}")
    inner = gauss_legendre(n_inner, 0.0, 1.0)
    rows = max(1, _CHUNK_EVALS // max(1, len(z) * n_inner))
    chunks = [slice(i, min(i + rows, len(t))) for i in range(0, len(t), rows)]
    out = np.empty((len(t), len(z)))

    def fill(sl):
        out[sl] = _kernel_block(t[sl], z, inner.nodes, inner.weights, part)

    n_workers = min(workers or worker_count(), len(chunks))
    if n_workers <= 1:
        for sl in chunks:
            fill(sl)
    else:
        # every cell is computed independently, so thread count cannot change the result
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, chunks))
    return out


def compute_write_kernel(config: KernelConfig, workers: int | None = None) -> WriteKernel:
    t_grid = gauss_legendre(config.n_t, 0.0, config.t_w)
    z_grid = gauss_legendre(config.n_z, 0.0, config.l)
    values = write_kernel_values(t_grid.nodes, z_grid.nodes, config.n_inner, workers=workers)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("write kernel has non-finite entries")
    return WriteKernel(config=config, t_grid=t_grid, z_grid=z_grid, values=values)


def kernel_imaginary_residual(config: KernelConfig, workers: int | None = None) -> float:
    """Largest magnitude of the sine part of the write-kernel integrand on the grid."""
    t_grid = gauss_legendre(config.n_t, 0.0, config.t_w)
    z_grid = gauss_legendre(config.n_z, 0.0, config.l)
    sine = write_kernel_values(t_grid.nodes, z_grid.nodes, config.n_inner, part="sin", workers=workers)
    return float(np.max(np.abs(sine)))


def compute_full_cycle(wk: WriteKernel) -> FullCycleKernel:
    b = wk.values * np.sqrt(wk.z_grid.weights)
    g = 0.5 * (b @ b.T)
    g = 0.5 * (g + g.T)
    return FullCycleKernel(t_grid=wk.t_grid, values=g)


def full_cycle_direct(config: KernelConfig, n_t: int, n_first: int = 48, n_second: int = 64) -> FullCycleKernel:
    """Full-cycle kernel with each ``(t, t')`` cell integrated on its own.

    The two write-kernel factors of every cell use different inner rules
    (``n_first`` points for the ``t`` argument, ``n_second`` for ``t'``), so
    nothing forces ``G(t, t') == G(t', t)`` except the quadratures agreeing.
    Used to validate the symmetry of the full-cycle kernel.
    """
    t_grid = gauss_legendre(n_t, 0.0, config.t_w)
    z_grid = gauss_legendre(config.n_z, 0.0, config.l)
    first = write_kernel_values(t_grid.nodes, z_grid.nodes, n_first)
    second = write_kernel_values(t_grid.nodes, z_grid.nodes, n_second)
    values = 0.5 * np.einsum("iz,jz,z->ij", first, second, z_grid.weights)
    return FullCycleKernel(t_grid=t_grid, values=values)


def schmidt_decompose(fck: FullCycleKernel, wk: WriteKernel, rank_tol: float = 1e-6) -> SchmidtBasis:
    """Schmidt modes of the memory kernel by the Nystrom method.

    ``W^1/2 G W^1/2`` (``W`` the time weights) is diagonalised; its
    eigenvalues are ``sqrt(lambda_i)`` and ``phi_i = v_i / sqrt(w)``. Modes
    below ``rank_tol`` times the leading eigenvalue are dropped. The spatial
    modes follow from ``sqrt(mu_i) g_i(z) = int phi_i(t) G_ab(t, z) dt`` with
    ``mu_i = sqrt(4 lambda_i)``. Each ``phi_i`` is signed so that its value at
    the first time node is non-negative.
    """
    if fck.t_grid.size != wk.t_grid.size or not np.array_equal(fck.t_grid.nodes, wk.t_grid.nodes):
        raise ValueError("full-cycle and write kernels are on different time grids")
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    sw = np.sqrt(fck.t_grid.weights)
    m = sw[:, None] * fck.values * sw[None, :]
    m = 0.5 * (m + m.T)
    eig = symmetric_eig(m)
    s = eig.eigenvalues
    if not s[0] > 0:
        raise DegenerateKernelError("full-cycle kernel has no positive eigenvalue")
    keep = s >= rank_tol * s[0]
    if not keep.any():
        raise DegenerateKernelError("no eigenvalue above the rank tolerance")
    s_kept = s[keep]
    lambdas = s_kept**2
    if np.any(lambdas > 1.0 + 1e-6):
        raise ArithmeticError(
            f"lambda_1 = {lambdas[0]:.12g} exceeds unity; the kernel quadrature is under-resolved"
        )
    phi = eig.eigenvectors[:, keep] / sw[:, None]
    signs = np.where(phi[0] < 0, -1.0, 1.0)
    phi = phi * signs
    mu = np.sqrt(4.0 * lambdas)
    g = (wk.values.T @ (fck.t_grid.weights[:, None] * phi)) / np.sqrt(mu)
    return SchmidtBasis(
        lambdas=lambdas,
        phi=phi,
        g=g,
        mu=mu,
        t_grid=fck.t_grid,
        z_grid=wk.z_grid,
        config=wk.config,
        discarded=np.clip(s[~keep], 0.0, None) ** 2,
    )


def phi_zero_frequency(basis: SchmidtBasis, i: int) -> float:
    """Zero-frequency amplitude ``(1/sqrt(T_W)) int phi_i(t) dt`` of mode ``i``.

    Only the square is meaningful; the sign follows the basis convention.
    """
    if not 0 <= i < basis.n_modes:
        raise IndexError(f"mode {i} out of range (n_modes={basis.n_modes})")
    a, b = basis.t_grid.domain
    return float(basis.t_grid.weights @ basis.phi[:, i]) / math.sqrt(b - a)


def orthonormality_residuals(basis: SchmidtBasis) -> tuple[float, float]:
    """Max deviation from the identity of the weighted Gram matrices of ``phi`` and ``g``."""
    eye = np.eye(basis.n_modes)
    gram_phi = basis.phi.T @ (basis.t_grid.weights[:, None] * basis.phi)
    gram_g = basis.g.T @ (basis.z_grid.weights[:, None] * basis.g)
    return float(np.max(np.abs(gram_phi - eye))), float(np.max(np.abs(gram_g - eye)))


def reconstruction_error(fck: FullCycleKernel, basis: SchmidtBasis) -> float:
    """Relative error of ``G = sum_i sqrt(lambda_i) phi_i(t) phi_i(t')`` at retained rank.

    Measured in the weighted L2 (Hilbert-Schmidt) norm
    ``(iint |G(t, t')|^2 dt dt')^1/2`` on the quadrature grid.
    """
    approx = (basis.phi * basis.sqrt_lambdas) @ basis.phi.T
    sw = np.sqrt(fck.t_grid.weights)
    scaled = sw[:, None] * sw[None, :]
    return float(np.linalg.norm((fck.values - approx) * scaled) / np.linalg.norm(fck.values * scaled))


def solve(config: KernelConfig, rank_tol: float = 1e-6, workers: int | None = None):
    """Write kernel, full-cycle kernel and Schmidt basis for ``config``."""
    wk = compute_write_kernel(config, workers=workers)
    fck = compute_full_cycle(wk)
    basis = schmidt_decompose(fck, wk, rank_tol=rank_tol)
    log.info(
        "kernel t_w=%g l=%g: %d modes retained, lambda_1=%.10f",
        config.t_w,
        config.l,
        basis.n_modes,
        basis.lambdas[0],
    )
    return wk, fck, basis
