"""Multimode Gaussian states in the quadrature picture.

A mode amplitude is ``e = x + i y`` and the vacuum has ``<x^2> = <y^2> = 1/4``.
States are immutable: every operation returns a new :class:`GaussianState`.
All maps used here are passive (real orthogonal, identical on the ``x`` and
``y`` blocks), so they never mix ``x`` with ``y``.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

VACUUM_VAR = 0.25


class Kind(enum.Enum):
    IN1 = "In1"
    IN2 = "In2"
    SPIN1 = "Spin1"
    SPIN2 = "Spin2"
    SPIN_PLUS = "SpinPlus"
    SPIN_MINUS = "SpinMinus"
    OUT1 = "Out1"
    OUT2 = "Out2"
    LOSS = "Loss"


@dataclass(frozen=True, order=True)
class ModeLabel:
    kind: Kind
    k: int | None = None

    def __str__(self) -> str:
        return f"Loss({self.k})" if self.kind is Kind.LOSS else self.kind.value

    @property
    def is_spin(self) -> bool:
        return self.kind in (Kind.SPIN1, Kind.SPIN2, Kind.SPIN_PLUS, Kind.SPIN_MINUS)

    @property
    def is_output(self) -> bool:
        return self.kind in (Kind.OUT1, Kind.OUT2)


IN1 = ModeLabel(Kind.IN1)
IN2 = ModeLabel(Kind.IN2)
SPIN1 = ModeLabel(Kind.SPIN1)
SPIN2 = ModeLabel(Kind.SPIN2)
SPIN_PLUS = ModeLabel(Kind.SPIN_PLUS)
SPIN_MINUS = ModeLabel(Kind.SPIN_MINUS)
OUT1 = ModeLabel(Kind.OUT1)
OUT2 = ModeLabel(Kind.OUT2)


def loss(k: int) -> ModeLabel:
    return ModeLabel(Kind.LOSS, k)


def parse_label(text: str) -> ModeLabel:
    text = text.strip()
    if text.startswith("Loss(") and text.endswith(")"):
        return loss(int(text[5:-1]))
    return ModeLabel(Kind(text))


@dataclass(frozen=True)
class QuadratureSpec:
    """First and second moments of one mode, uncorrelated with everything else."""

    mean_x: float = 0.0
    mean_y: float = 0.0
    var_x: float = VACUUM_VAR
    var_y: float = VACUUM_VAR

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_y > 0):
            raise ValueError(f"variances must be positive, got ({self.var_x}, {self.var_y})")
        if self.var_x * self.var_y < 1.0 / 16.0 - 1e-12:
            raise ValueError(
                f"var_x * var_y = {self.var_x * self.var_y:.6g} violates the Heisenberg bound 1/16"
            )

    @classmethod
    def squeezed(cls, var: float, quadrature: str = "x", mean: float = 0.0) -> QuadratureSpec:
        """Pure squeezed state with ``var`` on ``quadrature`` and the mean on the same axis."""
        anti = 1.0 / (16.0 * var)
        if quadrature.lower() == "x":
            return cls(mean_x=mean, var_x=var, var_y=anti)
        if quadrature.lower() == "y":
            return cls(mean_y=mean, var_x=anti, var_y=var)
        raise ValueError(f"quadrature must be 'x' or 'y', got {quadrature!r}")

    @property
    def is_vacuum(self) -> bool:
        return self == QuadratureSpec()

    def to_dict(self) -> dict:
        return {"mean_x": self.mean_x, "mean_y": self.mean_y, "var_x": self.var_x, "var_y": self.var_y}


@dataclass(frozen=True)
class GaussianState:
    """Quadrature means and covariance of a labelled register.

    Ordering is ``(x_1, y_1, x_2, y_2, ...)`` following ``labels``.

    States built by the functions of this module also carry the noise
    sources they were made from: ``cov = T diag(d) T^T`` with ``T = factor``
    and ``d = source_var``. Passive maps act on ``T`` directly, so quantities
    that cancel large anti-squeezed variances (Duan sums) are formed from rows
    of ``T`` and stay accurate even for near-ideal squeezing.
    """

    labels: tuple[ModeLabel, ...]
    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray | None = field(default=None, repr=False, compare=False)
    source_var: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate mode labels")
        n = 2 * len(self.labels)
        if self.mean.shape != (n,) or self.cov.shape != (n, n):
            raise ValueError("mean/cov shape does not match the number of labels")
        if (self.factor is None) != (self.source_var is None):
            raise ValueError("factor and source_var come together")
        if self.factor is not None:
            if self.factor.shape != (n, self.source_var.shape[0]):
                raise ValueError("factor shape does not match the registers")
            self.factor.setflags(write=False)
            self.source_var.setflags(write=False)
        self.mean.setflags(write=False)
        self.cov.setflags(write=False)

    @classmethod
    def from_sources(cls, labels, mean: np.ndarray, factor: np.ndarray, source_var: np.ndarray) -> GaussianState:
        cov = (factor * source_var) @ factor.T
        return cls(tuple(labels), mean, 0.5 * (cov + cov.T), factor, source_var)

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def index(self, label: ModeLabel) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"mode {label} not in register") from None

    def __contains__(self, label) -> bool:
        return label in self.labels

    def moments(self, label: ModeLabel):
        """``(mean[2], cov[2, 2])`` of a single mode."""
        j = 2 * self.index(label)
        return self.mean[j : j + 2].copy(), self.cov[j : j + 2, j : j + 2].copy()

    def is_vacuum_mode(self, label: ModeLabel, atol: float = 1e-12) -> bool:
        j = 2 * self.index(label)
        cross = np.delete(self.cov[j : j + 2], [j, j + 1], axis=1)
        return (
            np.allclose(self.mean[j : j + 2], 0.0, atol=atol)
            and np.allclose(self.cov[j : j + 2, j : j + 2], VACUUM_VAR * np.eye(2), atol=atol)
            and np.allclose(cross, 0.0, atol=atol)
        )

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Symplectic eigenvalues of ``cov``; physical states have all of them >= 1/4."""
        n = self.n_modes
        omega = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        try:
            # V = L L^T: i L^T omega L is Hermitian with eigenvalues +-nu
            chol = np.linalg.cholesky(self.cov)
            ev = np.abs(np.linalg.eigvalsh(1j * (chol.T @ omega @ chol)))
        except np.linalg.LinAlgError:
            # not positive definite, hence unphysical; the general route still reports it
            ev = np.abs(np.linalg.eigvals(1j * omega @ self.cov))
        return np.sort(ev)[::2]

    def is_physical(self, tol: float = 1e-9) -> bool:
        """Positive definite with every symplectic eigenvalue ``>= 1/4 - tol``."""
        if np.linalg.eigvalsh(self.cov)[0] <= 0:
            return False
        return bool(np.all(self.symplectic_eigenvalues() >= VACUUM_VAR - tol))

    def relabel(self, mapping: dict) -> GaussianState:
        labels = tuple(mapping.get(lab, lab) for lab in self.labels)
        return GaussianState(labels, self.mean.copy(), self.cov.copy(), self.factor, self.source_var)

    def to_dict(self) -> dict:
        return {
            "labels": [str(lab) for lab in self.labels],
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }


def vacuum_register(labels: Iterable[ModeLabel]) -> GaussianState:
    labels = tuple(labels)
    n = 2 * len(labels)
    return GaussianState.from_sources(labels, np.zeros(n), np.eye(n), np.full(n, VACUUM_VAR))


def add_modes(state: GaussianState, labels: Sequence[ModeLabel]) -> GaussianState:
    """Append vacuum modes to the register."""
    extra = 2 * len(labels)
    n = 2 * state.n_modes
    mean = np.concatenate([state.mean, np.zeros(extra)])
    if state.factor is not None:
        f = state.factor
        factor = np.zeros((n + extra, f.shape[1] + extra))
        factor[:n, : f.shape[1]] = f
        factor[n:, f.shape[1] :] = np.eye(extra)
        source_var = np.concatenate([state.source_var, np.full(extra, VACUUM_VAR)])
        return GaussianState.from_sources(state.labels + tuple(labels), mean, factor, source_var)
    cov = VACUUM_VAR * np.eye(n + extra)
    cov[:n, :n] = state.cov
    return GaussianState(state.labels + tuple(labels), mean, cov)


def set_mode(state: GaussianState, label: ModeLabel, spec: QuadratureSpec) -> GaussianState:
    """Replace one mode by an uncorrelated state with the given moments."""
    j = 2 * state.index(label)
    mean = state.mean.copy()
    mean[j : j + 2] = (spec.mean_x, spec.mean_y)
    if state.factor is not None:
        # drop the mode's old noise and give it two fresh sources of its own
        factor = np.concatenate([state.factor, np.zeros((2 * state.n_modes, 2))], axis=1)
        factor[j : j + 2, :] = 0.0
        factor[j, -2] = 1.0
        factor[j + 1, -1] = 1.0
        source_var = np.concatenate([state.source_var, [spec.var_x, spec.var_y]])
        return GaussianState.from_sources(state.labels, mean, factor, source_var)
    cov = state.cov.copy()
    cov[j : j + 2, :] = 0.0
    cov[:, j : j + 2] = 0.0
    cov[j, j] = spec.var_x
    cov[j + 1, j + 1] = spec.var_y
    return GaussianState(state.labels, mean, cov)


def apply_passive(state: GaussianState, labels: Sequence[ModeLabel], matrix) -> GaussianState:
    """Apply a real orthogonal mode transformation ``e_new = matrix @ e_old`` to ``labels``."""
    matrix = np.asarray(matrix, dtype=float)
    k = len(labels)
    if matrix.shape != (k, k):
        raise ValueError("transformation size does not match the number of modes")
    if not np.allclose(matrix @ matrix.T, np.eye(k), atol=1e-12):
        raise ValueError("mode transformation must be orthogonal")
    idx = [state.index(lab) for lab in labels]
    if len(set(idx)) != k:
        raise ValueError("modes must be distinct")
    s = np.eye(2 * state.n_modes)
    for r, ir in enumerate(idx):
        for c, ic in enumerate(idx):
            s[2 * ir, 2 * ic] = matrix[r, c]
            s[2 * ir + 1, 2 * ic + 1] = matrix[r, c]
    if state.factor is not None:
        return GaussianState.from_sources(state.labels, s @ state.mean, s @ state.factor, state.source_var)
    cov = s @ state.cov @ s.T
    cov = 0.5 * (cov + cov.T)
    return GaussianState(state.labels, s @ state.mean, cov)


def memory_half_cycle(
    state: GaussianState,
    source: ModeLabel,
    target: ModeLabel,
    lam: float,
    loss_mode: ModeLabel,
    allow_occupied: bool = False,
) -> GaussianState:
    """Transfer ``source`` into ``target`` with amplitude ``-lam**(1/4)``.

    The map is completed to a unitary with one vacuum ancilla ``loss_mode``::

        target' = -lam^1/4 source + sqrt(1 - sqrt(lam)) loss
        loss'   = sqrt(1 - sqrt(lam)) source + lam^1/4 loss
        source' = target            (the consumed source is left in vacuum)

    ``loss_mode`` is appended to the register if absent. ``target`` and the
    ancilla must be in vacuum unless ``allow_occupied`` is set.
    """
    if not (0.0 <= lam <= 1.0) or math.isnan(lam):
        raise ValueError(f"lam must lie in [0, 1], got {lam!r}")
    if len({source, target, loss_mode}) != 3:
        raise ValueError("source, target and loss modes must be distinct")
    if loss_mode not in state:
        state = add_modes(state, [loss_mode])
    if not allow_occupied:
        for lab in (target, loss_mode):
            if not state.is_vacuum_mode(lab):
                raise ValueError(f"mode {lab} is not in vacuum")
    r = lam**0.25
    k = math.sqrt(1.0 - math.sqrt(lam))
    matrix = [
        [0.0, 1.0, 0.0],
        [-r, 0.0, k],
        [k, 0.0, r],
    ]
    return apply_passive(state, [source, target, loss_mode], matrix)


def rotate_pm_basis(
    state: GaussianState, a: ModeLabel, b: ModeLabel, as_labels: tuple[ModeLabel, ModeLabel] | None = None
) -> GaussianState:
    """50/50 mixing ``(a, b) -> ((a + b)/sqrt2, (a - b)/sqrt2)``; an involution.

    ``as_labels`` renames the two output modes, e.g. ``(SpinPlus, SpinMinus)``
    to ``(Spin1, Spin2)``.
    """
    if a == b:
        raise ValueError("rotate_pm_basis needs two distinct modes")
    h = 1.0 / math.sqrt(2.0)
    out = apply_passive(state, [a, b], [[h, h], [h, -h]])
    if as_labels is not None:
        out = out.relabel({a: as_labels[0], b: as_labels[1]})
    return out


@dataclass(frozen=True)
class DuanResult:
    value: float
    pair: tuple[ModeLabel, ModeLabel]
    sign_choice: str  # "+x,-y" or "-x,+y", applied to the first mode

    def to_dict(self) -> dict:
        return {"value": self.value, "pair": [str(p) for p in self.pair], "sign_choice": self.sign_choice}


def duan(state: GaussianState, a: ModeLabel, b: ModeLabel) -> DuanResult:
    """Duan sum ``<(dx_a + dx_b)^2> + <(dy_a - dy_b)^2>``, minimised over the sign of mode ``a``.

    Values below 1 witness entanglement of the pair.
    """
    if a == b:
        raise ValueError("duan needs two distinct modes")
    i = 2 * state.index(a)
    j = 2 * state.index(b)
    if state.factor is not None:
        f, d = state.factor, state.source_var
        var_x_sum = float(np.sum(d * (f[i] + f[j]) ** 2))
        var_x_diff = float(np.sum(d * (f[i] - f[j]) ** 2))
        var_y_sum = float(np.sum(d * (f[i + 1] + f[j + 1]) ** 2))
        var_y_diff = float(np.sum(d * (f[i + 1] - f[j + 1]) ** 2))
        return _duan_pick(a, b, var_x_sum + var_y_diff, var_x_diff + var_y_sum)
    v = state.cov
    var_x_sum = v[i, i] + v[j, j] + 2 * v[i, j]
    var_x_diff = v[i, i] + v[j, j] - 2 * v[i, j]
    var_y_sum = v[i + 1, i + 1] + v[j + 1, j + 1] + 2 * v[i + 1, j + 1]
    var_y_diff = v[i + 1, i + 1] + v[j + 1, j + 1] - 2 * v[i + 1, j + 1]
    return _duan_pick(a, b, var_x_sum + var_y_diff, var_x_diff + var_y_sum)


def _duan_pick(a, b, plus, minus) -> DuanResult:
    if minus < plus:
        return DuanResult(float(minus), (a, b), "-x,+y")
    return DuanResult(float(plus), (a, b), "+x,-y")


def photon_number(state: GaussianState, label: ModeLabel) -> float:
    """``<e^dag e> = mean_x^2 + mean_y^2 + (var_x - 1/4) + (var_y - 1/4)``."""
    mean, cov = state.moments(label)
    return float(mean[0] ** 2 + mean[1] ** 2 + (cov[0, 0] - VACUUM_VAR) + (cov[1, 1] - VACUUM_VAR))


def mode_stats(state: GaussianState, label: ModeLabel) -> dict:
    """Means, full and normally ordered variances and photon number of one mode."""
    mean, cov = state.moments(label)
    return {
        "mean_x": float(mean[0]),
        "mean_y": float(mean[1]),
        "var_x": float(cov[0, 0]),
        "var_y": float(cov[1, 1]),
        "no_var_x": float(cov[0, 0] - VACUUM_VAR),
        "no_var_y": float(cov[1, 1] - VACUUM_VAR),
        "photon_number": photon_number(state, label),
    }


def cross_covariance(state: GaussianState, a: ModeLabel, b: ModeLabel) -> np.ndarray:
    i = 2 * state.index(a)
    j = 2 * state.index(b)
    return state.cov[i : i + 2, j : j + 2].copy()
