"""Dense symmetric-positive-definite solves and a two-column least squares.

Matrices are plain ``numpy.ndarray`` in row-major layout.  The Cholesky
factorization is the unblocked O(n^3) algorithm with vectorized column
updates, which is adequate for the Gram matrices handled here (n <= ~2000).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "cholesky",
    "solve_spd",
    "Lstsq2Result",
    "lstsq_2",
]


class NotPositiveDefiniteError(ValueError):
    """Cholesky pivot failure; ``pivot`` is the failing diagonal index."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = pivot


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == a`` for symmetric a."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - lower[j, :j] @ lower[j, :j]
        if d <= 0.0 or not np.isfinite(d):
            raise NotPositiveDefiniteError(j)
        lower[j, j] = np.sqrt(d)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def solve_spd(factor: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) x = b`` by forward and back substitution."""
    lower = np.asarray(factor, dtype=float)
    b = np.asarray(b, dtype=float)
    n = lower.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: factor {lower.shape}, rhs {b.shape}")
    y = np.zeros_like(b)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.zeros_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


@dataclass(frozen=True)
class Lstsq2Result:
    alpha1: float
    alpha2: float
    singular: bool


def lstsq_2(a1: np.ndarray, a2: np.ndarray, z: np.ndarray) -> Lstsq2Result:
    """Least squares ``z ~ alpha1*a1 + alpha2*a2`` via 2x2 normal equations.

    A column that is identically zero is dropped (its weight is 0).  When the
    columns are linearly dependent the ``singular`` flag is raised and both
    weights are returned as 0; callers choose their own fallback.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (a1.shape == a2.shape == z.shape):
        raise ValueError("all three vectors must share one shape")
    g11 = float(a1 @ a1)
    g22 = float(a2 @ a2)
    g12 = float(a1 @ a2)
    if g11 == 0.0 and g22 == 0.0:
        return Lstsq2Result(0.0, 0.0, singular=True)
    if g11 == 0.0:
        return Lstsq2Result(0.0, float(a2 @ z) / g22, singular=False)
    if g22 == 0.0:
        return Lstsq2Result(float(a1 @ z) / g11, 0.0, singular=False)
    det = g11 * g22 - g12 * g12
    if det <= 1e-12 * g11 * g22:
        return Lstsq2Result(0.0, 0.0, singular=True)
    r1 = float(a1 @ z)
    r2 = float(a2 @ z)
    alpha1 = (g22 * r1 - g12 * r2) / det
    alpha2 = (g11 * r2 - g12 * r1) / det
    return Lstsq2Result(alpha1, alpha2, singular=False)
