"""Special functions, quadrature and a symmetric eigensolver.

Everything here works in double precision on plain numpy arrays and holds
no state, so the functions can be called freely from worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.polynomial import legendre

# J0 power series is used up to this argument; the Hankel expansion beyond.
J0_SERIES_LIMIT = 12.0
_N_SERIES = 34
_N_HANKEL = 24

_SERIES_COEFS = np.empty(_N_SERIES)
_SERIES_COEFS[0] = 1.0
for _k in range(1, _N_SERIES):
    _SERIES_COEFS[_k] = _SERIES_COEFS[_k - 1] / (_k * _k)

# a_k = prod_{j<=k} (2j-1)^2 / (8j), so that the k-th Hankel term is a_k / x^k
_HANKEL_COEFS = np.empty(_N_HANKEL)
_HANKEL_COEFS[0] = 1.0
for _k in range(1, _N_HANKEL):
    _HANKEL_COEFS[_k] = _HANKEL_COEFS[_k - 1] * (2 * _k - 1) ** 2 / (8.0 * _k)


def _j0_series(x: np.ndarray) -> np.ndarray:
    y = -0.25 * x * x
    out = np.full_like(x, _SERIES_COEFS[-1])
    for c in _SERIES_COEFS[-2::-1]:
        out = out * y + c
    return out


def _j0_hankel(x: np.ndarray) -> np.ndarray:
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    # Horner in 1/x over even (P) and odd (Q) terms with alternating signs.
    for k in range(_N_HANKEL - 1, -1, -1):
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = p * inv * inv + sign * _HANKEL_COEFS[k]
        else:
            q = q * inv * inv + sign * _HANKEL_COEFS[k]
    q = -q * inv
    chi = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind of order zero.

    Accepts a scalar or an array of non-negative finite arguments. The power
    series is summed for ``x <= 12`` and the Hankel asymptotic expansion is
    used beyond; both branches are accurate to about 1e-12 absolute.

    Raises
    ------
    ValueError
        If any argument is negative, NaN or infinite.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("bessel_j0: argument must be finite")
    if np.any(arr < 0):
        raise ValueError("bessel_j0: argument must be non-negative")
    out = np.empty_like(arr)
    small = arr <= J0_SERIES_LIMIT
    if np.all(small):
        out = _j0_series(arr)
    else:
        out[small] = _j0_series(arr[small])
        out[~small] = _j0_hankel(arr[~small])
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights of a quadrature rule on ``[a, b]``."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple[float, float]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values) -> float:
        """Weighted sum of ``values`` sampled at the nodes (last axis)."""
        return np.asarray(values) @ self.weights


def gauss_legendre(n: int, a: float, b: float) -> QuadratureGrid:
    """Gauss-Legendre rule with ``n`` nodes mapped onto ``[a, b]``.

    Exact for polynomials of degree ``2n - 1``. The upper half of the nodes
    is computed as ``a + b`` minus the lower half, so the rule is mirror
    symmetric to rounding and its weights are exactly symmetric.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"gauss_legendre: n must be a positive integer, got {n!r}")
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise ValueError(f"gauss_legendre: need finite a < b, got ({a}, {b})")
    n = int(n)
    x, w = legendre.leggauss(n)
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * x
    weights = half * w
    # upper half mirrors the lower half
    half_n = n // 2
    nodes[n - half_n :] = (a + b) - nodes[:half_n][::-1]
    weights[n - half_n :] = weights[:half_n][::-1]
    # rescale so the weights sum to the interval length exactly
    weights *= (b - a) / weights.sum()
    return QuadratureGrid(nodes=nodes, weights=weights, domain=(float(a), float(b)))


def legendre_coefficients(grid: QuadratureGrid, values) -> np.ndarray:
    """Legendre series of the polynomial interpolating ``values`` at ``grid`` nodes.

    ``values`` may be 1-D (one function) or 2-D with functions in columns.
    Discrete Legendre transform: on an ``n``-point Gauss rule the first ``n``
    coefficients reproduce the interpolant exactly.
    """
    a, b = grid.domain
    x = (2.0 * grid.nodes - (a + b)) / (b - a)
    w = grid.weights * 2.0 / (b - a)
    vander = legendre.legvander(x, grid.size - 1)
    norm = (2.0 * np.arange(grid.size) + 1.0) / 2.0
    return norm[:, None] * (vander.T * w) @ np.asarray(values, dtype=float).reshape(grid.size, -1)


def legendre_evaluate(grid: QuadratureGrid, coefs: np.ndarray, points) -> np.ndarray:
    """Evaluate series from :func:`legendre_coefficients` at arbitrary points in the domain."""
    a, b = grid.domain
    x = (2.0 * np.asarray(points, dtype=float) - (a + b)) / (b - a)
    return legendre.legval(x, coefs).T


@dataclass(frozen=True)
class SymmetricEigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@njit(cache=True)
def _jacobi_sweeps(a, vt, max_sweeps):
    # a is symmetric and updated in place; rows of vt accumulate eigenvectors.
    n = a.shape[0]
    eps = np.finfo(np.float64).eps
    tiny = np.finfo(np.float64).tiny / eps
    for sweep in range(max_sweeps):
        rotated = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app = a[p, p]
                aqq = a[q, q]
                if abs(apq) <= tiny or abs(apq) <= eps * np.sqrt(abs(app * aqq)):
                    continue
                rotated += 1
                theta = (aqq - app) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    a[k, p] = a[p, k]
                    a[k, q] = a[q, k]
                for k in range(n):
                    vpk = vt[p, k]
                    vqk = vt[q, k]
                    vt[p, k] = c * vpk - s * vqk
                    vt[q, k] = s * vpk + c * vqk
        if rotated == 0:
            return sweep
    return -1


def symmetric_eig(a, max_sweeps: int = 60) -> SymmetricEigenResult:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    A pair ``(p, q)`` is rotated only while
    ``|a_pq| > eps * sqrt(|a_pp * a_qq|)``, the classical threshold that gives
    small eigenvalues high relative accuracy; the sweep order is fixed, so the
    result is bit-for-bit reproducible. Eigenvalues come back in descending
    order with eigenvectors in the matching columns.

    Raises
    ------
    ValueError
        If ``a`` is not square or is asymmetric beyond ``1e-10 * max|a|``.
    RuntimeError
        If the sweeps fail to converge.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("symmetric_eig: matrix must be square")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise ValueError("symmetric_eig: matrix has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("symmetric_eig: matrix is not symmetric")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    vt = np.eye(n)
    if n >= 2 and scale > 0.0:
        if _jacobi_sweeps(a, vt, max_sweeps) < 0:
            raise RuntimeError("symmetric_eig: Jacobi sweeps did not converge")
    v = vt.T
    d = np.diag(a).copy()
    order = np.argsort(-d, kind="stable")
    return SymmetricEigenResult(d[order], v[:, order])
