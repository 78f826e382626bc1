"""Dense real matrix helpers: Hadamard products, Frobenius norms, trace
normalization and a Jacobi eigenvalue solver for symmetric matrices.

Matrices are plain 2-D ``numpy.ndarray`` objects in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from numba import njit

from .errors import ConvergenceError, DegenerateInputError, DimensionError, InputError

SYMMETRY_TOL = 1e-10
MAX_SWEEPS = 100


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray  # sorted non-increasing
    iterations: int  # completed Jacobi sweeps


def as_matrix(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    return a


def _square(a, name="matrix") -> np.ndarray:
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def hadamard(a, b, *more) -> np.ndarray:
    """Elementwise product of two or more equally shaped matrices."""
    mats = [as_matrix(m) for m in (a, b, *more)]
    shape = mats[0].shape
    for m in mats[1:]:
        if m.shape != shape:
            raise DimensionError(f"Hadamard product of shapes {shape} and {m.shape}")
    return reduce(np.multiply, mats)


def frobenius_sq(a) -> float:
    """Sum of squared entries; equals the sum of squared eigenvalues for symmetric input."""
    a = as_matrix(a)
    return float(np.einsum("ij,ij->", a, a))


def trace_normalize(k) -> np.ndarray:
    k = _square(k)
    tr = float(np.trace(k))
    if not tr > 0.0:
        raise DegenerateInputError(f"trace normalization needs a positive trace, got {tr}")
    return k / tr


@njit(cache=True)
def _jacobi_sweep(A):
    """One cyclic (row-by-row) sweep of Jacobi rotations, in place."""
    n = A.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = A[p, q]
            if apq == 0.0:
                continue
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            if tau >= 0.0:
                t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            for k in range(n):
                akp = A[p, k]
                akq = A[q, k]
                A[p, k] = c * akp - s * akq
                A[q, k] = s * akp + c * akq
            for k in range(n):
                akp = A[k, p]
                akq = A[k, q]
                A[k, p] = c * akp - s * akq
                A[k, q] = s * akp + c * akq
            A[p, q] = 0.0
            A[q, p] = 0.0


@njit(cache=True)
def _max_asymmetry_tiled(a, tile):
    n = a.shape[0]
    worst = 0.0
    for i0 in range(0, n, tile):
        for j0 in range(i0, n, tile):
            for i in range(i0, min(i0 + tile, n)):
                for j in range(max(j0, i + 1), min(j0 + tile, n)):
                    d = abs(a[i, j] - a[j, i])
                    if d > worst:
                        worst = d
    return worst


def max_asymmetry(a) -> float:
    """``max |a_ij - a_ji|`` of a square matrix.

    Walks the upper triangle in tiles, so the transposed reads stay in
    cache; ``np.abs(a - a.T)`` is several times slower beyond n ~ 256.
    """
    a = _square(a)
    return float(_max_asymmetry_tiled(np.ascontiguousarray(a), 32))


def _off_norm(M: np.ndarray) -> float:
    off = M.copy()
    off[np.diag_indices_from(off)] = 0.0
    return float(np.linalg.norm(off))


def sym_eigenvalues(a, tol: float | None = None, max_sweeps: int = MAX_SWEEPS) -> SpectralResult:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep annihilates every off-diagonal pair once in row order.
    Iteration stops once the off-diagonal Frobenius norm falls below
    ``tol`` (default ``1e-12 * ||a||_F``).

    Raises
    ------
    DimensionError
        ``a`` is not square.
    InputError
        ``a`` is not symmetric within 1e-10 elementwise, or not finite.
    ConvergenceError
        The off-diagonal mass is still above ``tol`` after ``max_sweeps``.
    """
    a = _square(a)
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    asym = max_asymmetry(a)
    if asym > SYMMETRY_TOL:
        raise InputError(f"matrix is not symmetric (max |a - a^T| = {asym:.3e})")

    A = np.ascontiguousarray(0.5 * (a + a.T))
    if tol is None:
        tol = 1e-12 * float(np.linalg.norm(A))

    sweeps = 0
    off = _off_norm(A)
    while off > 0.0 and off >= tol:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e} >= {tol:.3e})"
            )
        _jacobi_sweep(A)
        sweeps += 1
        off = _off_norm(A)

    return SpectralResult(np.sort(np.diag(A))[::-1].copy(), sweeps)
