"""Input pulses cut from a synchronised sub-Poissonian laser.

The pulse is expanded over the temporal Schmidt modes. Its coherent part
fills mode ``i`` with ``n_bar T_W phi_i(omega=0)^2`` photons. The laser's
normally ordered quadrature correlation is

    <:dx(t) dx(t'):> = -(1/8) (1 - mu)/(1 - mu/2)^2 * G exp(-G |t - t'|),
    G = kappa (1 - mu/2),

which reduces to ``-(1/4) (1 - mu)/(1 - mu/2)^2`` per mode once the pulse is
much longer than ``1/kappa``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .gaussian import VACUUM_VAR, QuadratureSpec
from .kernel import SchmidtBasis, phi_zero_frequency

# modes with phi_i(0)^2 below this are left in vacuum
OCCUPANCY_THRESHOLD = 0.01
# below this kappa*T_W the finite-pulse double integral replaces the delta limit
FINITE_PULSE_KAPPA_TW = 1e3
_FINE_STEPS = 20_000


class Quadrature(enum.Enum):
    X = "X"
    Y = "Y"


@dataclass(frozen=True)
class SourceParams:
    n_bar_tw: float = 1000.0
    mu: float = 0.1
    kappa_tw: float = 1e4
    squeezed_quadrature: Quadrature = Quadrature.X

    def __post_init__(self):
        if not (math.isfinite(self.n_bar_tw) and self.n_bar_tw >= 0):
            raise ValueError(f"n_bar_tw must be finite and >= 0, got {self.n_bar_tw!r}")
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError(f"mu must lie in [0, 1], got {self.mu!r}")
        if not (math.isfinite(self.kappa_tw) and self.kappa_tw > 0):
            raise ValueError(f"kappa_tw must be finite and positive, got {self.kappa_tw!r}")
        if not isinstance(self.squeezed_quadrature, Quadrature):
            object.__setattr__(self, "squeezed_quadrature", Quadrature(self.squeezed_quadrature))
        if self.mu > 0.5:
            warnings.warn(f"mu = {self.mu} is not small; laser squeezing is weak", stacklevel=3)
        if self.kappa_tw < 10:
            warnings.warn(f"kappa_tw = {self.kappa_tw} is short; the pulse loses squeezing", stacklevel=3)

    def correlation_strength(self) -> float:
        """``(1 - mu)/(1 - mu/2)^2``: normally ordered x-variance is ``-1/4`` of this."""
        return (1.0 - self.mu) / (1.0 - 0.5 * self.mu) ** 2


@dataclass(frozen=True)
class InputPulseSpec:
    """Per-Schmidt-mode moments of the input pulse (full variances, vacuum = 1/4)."""

    mean_x: np.ndarray
    mean_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        prod = np.asarray(self.var_x) * np.asarray(self.var_y)
        if np.any(prod < 1.0 / 16.0 - 1e-12):
            raise ValueError("input spec violates the Heisenberg bound var_x * var_y >= 1/16")

    @property
    def n_modes(self) -> int:
        return len(self.mean_x)

    def mode(self, i: int) -> QuadratureSpec:
        return QuadratureSpec(
            float(self.mean_x[i]), float(self.mean_y[i]), float(self.var_x[i]), float(self.var_y[i])
        )

    @classmethod
    def from_modes(cls, modes, notes=()) -> InputPulseSpec:
        modes = list(modes)
        return cls(
            mean_x=np.array([m.mean_x for m in modes]),
            mean_y=np.array([m.mean_y for m in modes]),
            var_x=np.array([m.var_x for m in modes]),
            var_y=np.array([m.var_y for m in modes]),
            notes=tuple(notes),
        )

    def to_dict(self) -> dict:
        return {
            "modes": [dict(i=i + 1, **self.mode(i).to_dict()) for i in range(self.n_modes)],
            "notes": list(self.notes),
        }


def mode_occupancy(params: SourceParams, basis: SchmidtBasis, i: int) -> float:
    """Mean photon number ``n_bar T_W phi_i(0)^2`` of Schmidt mode ``i``."""
    return params.n_bar_tw * phi_zero_frequency(basis, i) ** 2


def squeezed_variance(params: SourceParams) -> tuple[float, float]:
    """Squeezed-quadrature variance per occupied mode for a long pulse.

    Returns ``(normally_ordered, full)``: ``-(1/4)(1 - mu)/(1 - mu/2)^2`` and
    ``mu^2 / (16 (1 - mu/2)^2)``, the two differing by the vacuum ``1/4``.
    """
    mu = params.mu
    normal = -0.25 * params.correlation_strength()
    full = mu * mu / (16.0 * (1.0 - 0.5 * mu) ** 2)
    return normal, full


def _exponential_overlap(f: np.ndarray, h: float, rate: float) -> float:
    """``iint f(t) f(t') rate exp(-rate |t - t'|)`` for ``f`` sampled on a uniform grid.

    ``f`` is taken piecewise linear; the inner convolution is integrated
    exactly on each step, so the result stays accurate for ``rate * h >> 1``.
    """
    x = rate * h
    decay = math.exp(-x)
    alpha = -math.expm1(-x)
    beta = 1.0 - alpha / x
    drive = f[:-1] * (alpha - beta) + f[1:] * beta
    y = np.empty_like(f)
    y[0] = 0.0
    y[1:] = lfilter([1.0], [1.0, -decay], drive)
    prod = f * y
    return 2.0 * h * (prod.sum() - 0.5 * (prod[0] + prod[-1]))


def finite_pulse_correction(params: SourceParams, basis: SchmidtBasis, i: int, n_steps: int = _FINE_STEPS) -> float:
    """Normally ordered squeezed variance of mode ``i`` at finite ``kappa T_W``.

    Evaluates the double integral of the laser correlation against
    ``phi_i(t) phi_i(t')`` without the delta-function limit.
    """
    if not 0 <= i < basis.n_modes:
        raise IndexError(f"mode {i} out of range (n_modes={basis.n_modes})")
    a, b = basis.t_grid.domain
    t_w = b - a
    t = np.linspace(a, b, n_steps + 1)
    f = basis.phi_at(t, i)
    rate = params.kappa_tw / t_w * (1.0 - 0.5 * params.mu)
    overlap = _exponential_overlap(f, t_w / n_steps, rate)
    return -0.125 * params.correlation_strength() * overlap


def build_input_spec(params: SourceParams, basis: SchmidtBasis) -> InputPulseSpec:
    """Per-mode means and variances of the input pulse.

    The coherent amplitude ``sqrt(n_bar T_W) phi_i(0)`` sits on the squeezed
    quadrature. Occupied modes (``phi_i(0)^2 >= 0.01``) are squeezed; the
    orthogonal quadrature is completed to a pure state, ``1/(16 var)``.
    """
    normal_inf, full_inf = squeezed_variance(params)
    finite = params.kappa_tw < FINITE_PULSE_KAPPA_TW
    if full_inf == 0.0:
        raise ValueError("mu = 0 gives infinite anti-squeezing; use mu > 0")
    notes = ["anti-squeezed quadrature set by pure-state completion 1/(16 var)"]
    if finite:
        notes.append("finite-pulse correlation integral used (kappa_tw < 1e3)")
    modes = []
    for i in range(basis.n_modes):
        phi0 = phi_zero_frequency(basis, i)
        amp = math.sqrt(params.n_bar_tw) * phi0
        if phi0 * phi0 < OCCUPANCY_THRESHOLD:
            var = VACUUM_VAR
        elif finite:
            var = VACUUM_VAR + finite_pulse_correction(params, basis, i)
        else:
            var = full_inf
        modes.append(QuadratureSpec.squeezed(var, params.squeezed_quadrature.value.lower(), amp))
    return InputPulseSpec.from_modes(modes, notes)
