"""Finite-difference integration of the dimensionless tripod equations.

Classical amplitudes obey

    d_z a = -c / sqrt2
    d_t c =  a / sqrt2 + W1 b1 + W2 b2
    d_t bk = -Wk c

with ``(W1, W2)`` the normalised Rabi pair of a :class:`DrivingConfig`. The
scheme is trapezoidal in both ``t`` and ``z`` (a box scheme, second order).
At fixed ``z`` the trapezoidal ``t``-update is a causal linear filter, so
``c = F a + u`` with a lower-triangular matrix ``F``; marching in ``z`` then
needs one triangular solve per step.

This path shares nothing with the kernel module except the Schmidt modes it
is fed, and is used to cross-check the kernel predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import SchmidtBasis
from .protocol import DrivingConfig

SQRT_HALF = 1.0 / math.sqrt(2.0)
# field growth beyond this multiple of the drive is treated as instability
_GROWTH_LIMIT = 1e3


class StepSizeError(ArithmeticError):
    """Raised when the integration blows up."""


@dataclass(frozen=True)
class PdeGrid:
    n_t: int
    n_z: int
    t_w: float
    l: float

    def __post_init__(self):
        if self.n_t < 2 or self.n_z < 2:
            raise ValueError("PDE grid needs at least 2 steps per axis")
        if not (self.t_w > 0 and self.l > 0):
            raise ValueError("t_w and l must be positive")

    @property
    def dt(self) -> float:
        return self.t_w / self.n_t

    @property
    def dz(self) -> float:
        return self.l / self.n_z

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.t_w, self.n_t + 1)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.l, self.n_z + 1)

    def refined(self, factor: float) -> PdeGrid:
        return PdeGrid(int(round(self.n_t * factor)), int(round(self.n_z * factor)), self.t_w, self.l)


@dataclass
class FieldState:
    """Field amplitudes sampled as ``[time index, z index]``."""

    grid: PdeGrid
    a: np.ndarray
    c: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    @property
    def b_plus(self) -> np.ndarray:
        return SQRT_HALF * (self.b1 + self.b2)

    @property
    def b_minus(self) -> np.ndarray:
        return SQRT_HALF * (self.b1 - self.b2)

    def rows(self):
        """``(t, z, a, c, b1, b2)`` tuples in time-major order."""
        t, z = self.grid.t, self.grid.z
        for n in range(len(t)):
            for m in range(len(z)):
                yield t[n], z[m], self.a[n, m], self.c[n, m], self.b1[n, m], self.b2[n, m]


@dataclass
class _Propagator:
    """Trapezoidal-in-time response of ``(c, b1, b2)`` at a fixed position."""

    response: np.ndarray  # (3, N+1, N+1): s_n = response[:, n, k] a_k
    homogeneous: np.ndarray  # (N+1, 3, 3): s_n = homogeneous[n] s_0 with no drive


def _propagator(grid: PdeGrid, cfg: DrivingConfig) -> _Propagator:
    w1, w2 = cfg.rabi
    gen = np.array([[0.0, w1, w2], [-w1, 0.0, 0.0], [-w2, 0.0, 0.0]])
    half = 0.5 * grid.dt
    lhs = np.eye(3) - half * gen
    step = np.linalg.solve(lhs, np.eye(3) + half * gen)
    kick = np.linalg.solve(lhs, np.array([half * SQRT_HALF, 0.0, 0.0]))
    size = grid.n_t + 1
    response = np.zeros((3, size, size))
    homogeneous = np.empty((size, 3, 3))
    homogeneous[0] = np.eye(3)
    eye = np.eye(size)
    for n in range(grid.n_t):
        drive = eye[n] + eye[n + 1]
        response[:, n + 1, :] = step @ response[:, n, :] + np.outer(kick, drive)
        homogeneous[n + 1] = step @ homogeneous[n]
    return _Propagator(response, homogeneous)


def _march(grid: PdeGrid, prop: _Propagator, a0: np.ndarray, s0: np.ndarray) -> FieldState:
    """March ``a`` from ``z = 0`` to ``z = L`` given ``a(t, 0)`` and ``s(t=0, z)``."""
    f_c = prop.response[0]
    size = grid.n_t + 1
    h = 0.5 * grid.dz * SQRT_HALF
    # homogeneous c from the initial spin profile: u[n, m] = (H_n s0(z_m))[0]
    u = np.einsum("nj,jm->nm", prop.homogeneous[:, 0, :], s0)
    lower = np.eye(size) + h * f_c
    upper = np.eye(size) - h * f_c
    a = np.empty((size, grid.n_z + 1))
    a[:, 0] = a0
    for m in range(grid.n_z):
        rhs = upper @ a[:, m] - h * (u[:, m] + u[:, m + 1])
        a[:, m + 1] = solve_triangular(lower, rhs, lower=True, check_finite=False)
    c = f_c @ a + u
    b1 = prop.response[1] @ a + np.einsum("nj,jm->nm", prop.homogeneous[:, 1, :], s0)
    b2 = prop.response[2] @ a + np.einsum("nj,jm->nm", prop.homogeneous[:, 2, :], s0)
    fields = FieldState(grid, a, c, b1, b2)
    scale = max(np.max(np.abs(a0)), np.max(np.abs(s0)), 1e-300)
    peak = max(np.max(np.abs(arr)) for arr in (a, c, b1, b2))
    if not np.isfinite(peak) or peak > _GROWTH_LIMIT * scale:
        raise StepSizeError(f"field growth {peak / scale:.3g}x the drive; refine the grid")
    return fields


def integrate_write(grid: PdeGrid, a_in, cfg: DrivingConfig) -> FieldState:
    """Write the input envelope ``a_in(t)`` (sampled on ``grid.t``) into a medium at rest."""
    a_in = np.asarray(a_in, dtype=float)
    if a_in.shape != (grid.n_t + 1,):
        raise ValueError(f"a_in must have {grid.n_t + 1} samples, got {a_in.shape}")
    s0 = np.zeros((3, grid.n_z + 1))
    return _march(grid, _propagator(grid, cfg), a_in, s0)


def integrate_read(grid: PdeGrid, b_init, cfg: DrivingConfig, backward: bool = True, return_fields: bool = False):
    """Read out a stored spin wave ``b_init(z)`` of the wave addressed by ``cfg``.

    With ``backward`` the stored profile is mirrored ``z -> L - z`` before
    propagating, which realises backward retrieval. Returns the output
    envelope ``a(t, L)`` (and the fields if ``return_fields``).
    """
    b_init = np.asarray(b_init, dtype=float)
    if b_init.shape != (grid.n_z + 1,):
        raise ValueError(f"b_init must have {grid.n_z + 1} samples, got {b_init.shape}")
    profile = b_init[::-1] if backward else b_init
    w1, w2 = cfg.rabi
    s0 = np.vstack([np.zeros_like(profile), w1 * profile, w2 * profile])
    fields = _march(grid, _propagator(grid, cfg), np.zeros(grid.n_t + 1), s0)
    a_out = fields.a[:, -1].copy()
    return (a_out, fields) if return_fields else a_out


def _trapezoid_norm(values: np.ndarray, h: float) -> float:
    sq = values * values
    return math.sqrt(h * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def relative_l2(actual, expected, h: float = 1.0) -> float:
    """Relative L2 distance on a uniform grid (trapezoidal weights)."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = _trapezoid_norm(expected, h)
    if denom == 0.0:
        return _trapezoid_norm(actual - expected, h)
    return _trapezoid_norm(actual - expected, h) / denom


def excitation_balance(fields: FieldState) -> dict:
    """Input flux, output flux and stored excitation at ``t = T_W`` for a write run."""
    grid = fields.grid
    flux_in = _trapezoid_norm(fields.a[:, 0], grid.dt) ** 2
    flux_out = _trapezoid_norm(fields.a[:, -1], grid.dt) ** 2
    stored = _trapezoid_norm(fields.b1[-1], grid.dz) ** 2
    stored += _trapezoid_norm(fields.b2[-1], grid.dz) ** 2
    stored += _trapezoid_norm(fields.c[-1], grid.dz) ** 2
    return {"flux_in": flux_in, "flux_out": flux_out, "stored": stored}


@dataclass
class OracleCase:
    case: str
    rel_l2_error: float
    order: float | None = None


@dataclass
class OracleReport:
    grid: PdeGrid
    mode: int
    cases: list[OracleCase] = field(default_factory=list)
    coarse_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_t": self.grid.n_t,
            "n_z": self.grid.n_z,
            "mode": self.mode + 1,
            "cases": [
                {"case": c.case, "rel_l2_error": c.rel_l2_error, "order": c.order} for c in self.cases
            ],
        }

    def rows(self):
        for c in self.cases:
            yield c.case, c.rel_l2_error, c.order


def _kernel_errors(grid: PdeGrid, basis: SchmidtBasis, mode: int, cfg: DrivingConfig, backward: bool) -> dict:
    lam = float(basis.lambdas[mode])
    t, z = grid.t, grid.z
    phi = basis.phi_at(t, mode)
    g = basis.g_at(z, mode)
    wave = _wave_view(cfg)

    written = integrate_write(grid, basis.phi_at(grid.t_w - t, mode), cfg)
    stored = wave(written)[-1]
    write_err = relative_l2(stored, -(lam**0.25) * g, grid.dz)

    a_read = integrate_read(grid, g, cfg, backward=backward)
    read_err = relative_l2(a_read, -(lam**0.25) * phi, grid.dt)

    a_full = integrate_read(grid, stored, cfg, backward=backward)
    full_err = relative_l2(a_full, math.sqrt(lam) * phi, grid.dt)
    return {"write": write_err, "read": read_err, "full_cycle": full_err}


def _wave_view(cfg: DrivingConfig):
    w1, w2 = cfg.rabi
    return lambda f: w1 * f.b1 + w2 * f.b2


def compare_with_kernel(
    grid: PdeGrid,
    basis: SchmidtBasis,
    mode: int = 0,
    cfg: DrivingConfig = DrivingConfig.SYMMETRIC_PLUS,
    backward: bool = True,
    refine: bool = True,
) -> OracleReport:
    """Relative L2 errors between the PDE and the kernel predictions.

    Cases: ``write`` (stored wave vs ``-lambda^1/4 g``), ``read``
    (output vs ``-lambda^1/4 phi`` for input ``g``) and ``full_cycle``
    (output vs ``sqrt(lambda) phi`` for input ``phi``). With ``refine`` the
    same cases are run on a grid half as fine and the observed convergence
    order ``log2(e_coarse / e_fine)`` is reported.
    """
    a, b = basis.t_grid.domain
    za, zb = basis.z_grid.domain
    if not (math.isclose(b - a, grid.t_w, rel_tol=1e-12) and math.isclose(zb - za, grid.l, rel_tol=1e-12)):
        raise ValueError(
            f"grid (t_w={grid.t_w}, l={grid.l}) does not match the basis (t_w={b - a}, l={zb - za})"
        )
    if not 0 <= mode < basis.n_modes:
        raise IndexError(f"mode {mode} out of range")
    fine = _kernel_errors(grid, basis, mode, cfg, backward)
    report = OracleReport(grid=grid, mode=mode)
    coarse = _kernel_errors(grid.refined(0.5), basis, mode, cfg, backward) if refine else {}
    report.coarse_errors = coarse
    for case, err in fine.items():
        order = None
        if refine and err > 0 and coarse[case] > 0:
            order = math.log2(coarse[case] / err)
        report.cases.append(OracleCase(case, err, order))
    return report
