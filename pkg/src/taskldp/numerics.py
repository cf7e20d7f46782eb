"""Dense linear-algebra kernels with explicit contracts.

Matrices and vectors are plain ``numpy.ndarray`` objects (float64,
row-major). Every routine validates its preconditions and raises a typed
error instead of returning garbage, so callers can rely on the stated
postconditions.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    SingularTriangular,
)

SYMMETRY_TOL = 1e-9
PIVOT_RTOL = 1e-12  # pivot must exceed PIVOT_RTOL * max diagonal entry
JACOBI_SWEEP_CAP = 100


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _require_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > tol * max(1.0, np.max(np.abs(m))):
        raise DimensionMismatch("matrix is not symmetric within tolerance")
    # Work on the symmetrized copy so tiny asymmetries cannot leak through.
    return 0.5 * (m + m.T)


def cholesky(spd) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Parameters
    ----------
    spd : (n, n) array_like
        Symmetric (within 1e-9) positive definite matrix.

    Returns
    -------
    (n, n) ndarray
        Lower-triangular factor with strictly positive diagonal such that
        ``factor @ factor.T`` reproduces the input.

    Raises
    ------
    NotPositiveDefinite
        If any pivot falls at or below ``PIVOT_RTOL * max(diagonal)``,
        which signals a (numerically) rank-deficient matrix. Callers that
        expect degenerate covariance should regularize and retry.
    """
    a = _require_symmetric(as_matrix(spd, "spd"))
    n = a.shape[0]
    lower = np.zeros_like(a)
    pivot_floor = PIVOT_RTOL * max(np.max(np.abs(np.diag(a))), np.finfo(float).tiny)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= pivot_floor:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {j} is below tolerance {pivot_floor:.3e}"
            )
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def sym_eig(sym) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted in non-increasing order and the matching
    orthonormal eigenvector columns. The sign of each eigenvector column is
    normalized so its first non-negligible entry is non-negative, which
    makes golden tests reproducible.

    Parameters
    ----------
    sym : (n, n) array_like
        Symmetric matrix (within 1e-9).

    Returns
    -------
    eigenvalues : (n,) ndarray, non-increasing
    eigenvectors : (n, n) ndarray, orthonormal columns

    Raises
    ------
    NoConvergence
        If the off-diagonal mass has not vanished after the sweep cap.
    """
    a = _require_symmetric(as_matrix(sym, "sym"))
    n = a.shape[0]
    vecs = np.eye(n)
    if n <= 1:
        return np.diag(a).copy(), vecs

    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    off_tol = 1e-14 * n * scale
    for _ in range(JACOBI_SWEEP_CAP):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= off_tol / n:
                    continue
                theta = 0.5 * np.arctan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * vecs[:, p] - s * vecs[:, q]
                rot_q = s * vecs[:, p] + c * vecs[:, q]
                vecs[:, p], vecs[:, q] = rot_p, rot_q
    else:
        raise NoConvergence(f"Jacobi sweep cap {JACOBI_SWEEP_CAP} reached")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    # Sign convention: first entry of each column with magnitude above the
    # negligibility threshold is made non-negative.
    for j in range(n):
        col = vecs[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    return values, vecs


def solve_spd(spd, rhs) -> np.ndarray:
    """Solve ``spd @ x = rhs`` for symmetric positive definite ``spd``.

    Factorizes once and applies forward/backward substitution, so the
    residual ``spd @ x - rhs`` is small in a relative sense.
    """
    a = as_matrix(spd, "spd")
    b = np.asarray(rhs, dtype=float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"rhs has {b.shape[0]} rows, expected {a.shape[0]}"
        )
    lower = cholesky(a)
    y = _forward_substitute(lower, b)
    x = _backward_substitute(lower.T, y)
    return x[:, 0] if squeeze else x


def _forward_substitute(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = lower.shape[0]
    out = np.zeros_like(rhs)
    for i in range(n):
        out[i] = (rhs[i] - lower[i, :i] @ out[:i]) / lower[i, i]
    return out


def _backward_substitute(upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = upper.shape[0]
    out = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        out[i] = (rhs[i] - upper[i, i + 1 :] @ out[i + 1 :]) / upper[i, i]
    return out


def lower_tri_inverse_apply(lower, v) -> np.ndarray:
    """Apply the inverse of a lower-triangular matrix to a vector.

    Computes ``x`` with ``lower @ x = v`` by forward substitution.

    Raises
    ------
    SingularTriangular
        If a diagonal entry is too small to divide by.
    """
    tri = as_matrix(lower, "lower")
    vec = as_vector(v, "v")
    n = tri.shape[0]
    if tri.shape[1] != n or vec.shape[0] != n:
        raise DimensionMismatch(
            f"incompatible shapes {tri.shape} and {vec.shape}"
        )
    diag_floor = 1e-300
    if np.any(np.abs(np.diag(tri)) <= diag_floor):
        raise SingularTriangular("zero diagonal entry in triangular solve")
    out = np.zeros(n)
    for i in range(n):
        out[i] = (vec[i] - tri[i, :i] @ out[:i]) / tri[i, i]
    return out
