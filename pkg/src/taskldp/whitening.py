"""Moment estimation, Cholesky whitening, and the whitened task spectrum.

Fitting produces a model that maps raw samples ``x`` to a representation
``h`` with (sample) mean zero and identity covariance, via the lower
Cholesky factor of the covariance. The task matrix is transported into the
same coordinates and its Gram spectrum extracted, because all of the codec
design downstream operates on the whitened representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial import ConvexHull, QhullError

from . import numerics
from .data_io import DataMatrix
from .errors import DimensionMismatch, EmptyData, NotPositiveDefinite, TooFewSamples


@dataclass(frozen=True)
class WhiteningModel:
    """Sample mean and lower Cholesky factor of the (jittered) covariance."""

    mean: np.ndarray
    factor: np.ndarray  # lower-triangular, positive diagonal
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class WhitenedTask:
    """Whitened task matrix and the eigen-spectrum of its Gram matrix."""

    task_matrix: np.ndarray  # task matrix expressed in whitened coordinates
    eigenvalues: np.ndarray  # non-increasing, clipped at 0
    eigenvectors: np.ndarray  # orthonormal columns

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]


def identity_model(dim: int) -> WhiteningModel:
    """Model whose whitening map is the identity (mean 0, factor I)."""
    return WhiteningModel(mean=np.zeros(dim), factor=np.eye(dim))


def fit_whitening(data: DataMatrix) -> WhiteningModel:
    """Estimate mean and covariance, then factor the covariance.

    Uses the unbiased (N-1) covariance estimator. If the sample covariance
    is not numerically positive definite, a diagonal jitter starting at
    1e-10 * trace/n is added and doubled until the factorization succeeds;
    the jitter actually used is recorded on the model.
    """
    x = data.values
    n_samples, dim = x.shape
    if n_samples < dim + 1:
        raise TooFewSamples(
            f"need at least {dim + 1} samples for dimension {dim}, got {n_samples}"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n_samples - 1)

    jitter = 0.0
    try:
        factor = numerics.cholesky(cov)
    except NotPositiveDefinite:
        base = max(np.trace(cov) / dim, np.finfo(float).tiny)
        jitter = 1e-10 * base
        while True:
            try:
                factor = numerics.cholesky(cov + jitter * np.eye(dim))
                break
            except NotPositiveDefinite:
                jitter *= 2.0
                if not np.isfinite(jitter):
                    raise
    return WhiteningModel(mean=mean, factor=factor, jitter=jitter)


def whiten(model: WhiteningModel, x) -> np.ndarray:
    """Map one sample into whitened coordinates: solve factor @ h = x - mean."""
    vec = numerics.as_vector(x, "x")
    if vec.shape[0] != model.dim:
        raise DimensionMismatch(f"expected dimension {model.dim}, got {vec.shape[0]}")
    return numerics.lower_tri_inverse_apply(model.factor, vec - model.mean)


def unwhiten(model: WhiteningModel, h) -> np.ndarray:
    """Inverse of :func:`whiten`."""
    vec = numerics.as_vector(h, "h")
    if vec.shape[0] != model.dim:
        raise DimensionMismatch(f"expected dimension {model.dim}, got {vec.shape[0]}")
    return model.factor @ vec + model.mean


def whiten_rows(model: WhiteningModel, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`whiten` over the rows of a sample matrix."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"expected width {model.dim}, got {x.shape[1]}")
    return solve_triangular(model.factor, (x - model.mean).T, lower=True).T


def unwhiten_rows(model: WhiteningModel, h: np.ndarray) -> np.ndarray:
    """Vectorized :func:`unwhiten` over rows."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if h.shape[1] != model.dim:
        raise DimensionMismatch(f"expected width {model.dim}, got {h.shape[1]}")
    return h @ model.factor.T + model.mean


def build_task(model: WhiteningModel, task_matrix) -> WhitenedTask:
    """Transport a task matrix into whitened coordinates and diagonalize it.

    The whitened task matrix is ``task_matrix @ factor``; the returned
    eigenvalues of its Gram matrix measure how much the task cares about
    each principal direction (tiny negative values from round-off are
    clipped to zero).
    """
    k = numerics.as_matrix(task_matrix, "task_matrix")
    if k.shape[1] != model.dim:
        raise DimensionMismatch(
            f"task matrix has {k.shape[1]} columns, expected {model.dim}"
        )
    whitened = k @ model.factor
    values, vectors = numerics.sym_eig(whitened.T @ whitened)
    return WhitenedTask(
        task_matrix=whitened,
        eigenvalues=np.clip(values, 0.0, None),
        eigenvectors=vectors,
    )


def radius_bounds(whitened: DataMatrix | np.ndarray) -> tuple[float, float, float]:
    """Bounding radii of the empirical sample cloud in whitened coordinates.

    Returns ``(r_min, r_max, r_used)``:

    * ``r_max`` is the largest sample norm. It is exact for the empirical
      convex hull because the Euclidean maximum over a hull is attained at
      a vertex.
    * ``r_min`` is the radius of the largest origin-centered ball inside
      the empirical hull. For dimension <= 3 it is computed exactly from
      the hull facets; in higher dimension it falls back to the support of
      the cloud along the 2n axis directions, which only ever
      overestimates, so it is clamped to ``r_max``. The value is
      diagnostic only (bound-gap reporting); the design pipeline always
      operates at ``r_used = r_max``.

    The true data-domain boundary is unobservable from samples, so both
    radii describe the empirical hull, not the underlying domain.
    """
    h = whitened.values if isinstance(whitened, DataMatrix) else np.asarray(whitened, dtype=float)
    h = np.atleast_2d(h)
    if h.shape[0] == 0:
        raise EmptyData("no samples")
    r_max = float(np.max(np.linalg.norm(h, axis=1)))
    r_min = _inscribed_radius(h)
    r_min = float(min(max(r_min, 0.0), r_max))
    return r_min, r_max, r_max


def _inscribed_radius(h: np.ndarray) -> float:
    dim = h.shape[1]
    if dim == 1:
        return min(float(np.max(h)), float(-np.min(h)))
    if dim <= 3 and h.shape[0] > dim:
        try:
            hull = ConvexHull(h)
        except QhullError:
            return _axis_support_radius(h)
        # Facets satisfy normal @ x + offset <= 0 inside, with unit normals,
        # so -offset is the distance from the origin to each facet plane.
        offsets = hull.equations[:, -1]
        if np.any(offsets > 0):
            return 0.0  # origin is outside (or on) the hull
        return float(np.min(-offsets))
    return _axis_support_radius(h)


def _axis_support_radius(h: np.ndarray) -> float:
    return float(min(np.max(h, axis=0).min(), (-np.min(h, axis=0)).min()))
