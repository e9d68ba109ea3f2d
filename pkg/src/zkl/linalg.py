"""Small dense linear algebra helpers.

Thin, validated wrappers over numpy/LAPACK. Everything is computed in
float64; inputs of other dtypes are promoted.
"""
from __future__ import annotations

import numpy as np

from .errors import RejectedInputError

SYMMETRY_TOL = 1e-10


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise RejectedInputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise RejectedInputError(f"{name} has non-finite entries")
    return a


def as_vector(v, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise RejectedInputError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise RejectedInputError(f"{name} has non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=np.float64)))


def singular_values(m) -> np.ndarray:
    """Singular values sorted in non-decreasing order."""
    a = as_matrix(m)
    if a.size == 0:
        return np.zeros(0)
    return np.sort(np.linalg.svd(a, compute_uv=False))


def spectral_norm(m) -> float:
    a = as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(singular_values(a)[-1])


def is_symmetric(m, tol: float = SYMMETRY_TOL) -> bool:
    """Symmetry test relative to the largest entry (absolute for entries below 1)."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= tol * scale)


def symmetric_eigenvalues(m) -> np.ndarray:
    """Real eigenvalues of a symmetric matrix, non-decreasing."""
    a = as_matrix(m)
    if not is_symmetric(a):
        raise RejectedInputError("matrix is not symmetric within 1e-10")
    # eigvalsh reads one triangle only; symmetrize so both triangles count
    return np.linalg.eigvalsh(0.5 * (a + a.T))


def power_iteration_norm(m, iters: int = 2000, tol: float = 1e-14, seed: int = 0) -> float:
    """Largest singular value by power iteration on M^T M.

    Independent of LAPACK; used as a cross-check for :func:`spectral_norm`.
    """
    a = as_matrix(m)
    if not np.any(a):
        return 0.0
    x = np.random.default_rng(seed).standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = a.T @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        new = float(np.sqrt(ny))
        if abs(new - sigma) <= tol * new:
            sigma = new
            break
        sigma = new
    return float(np.linalg.norm(a @ x))
