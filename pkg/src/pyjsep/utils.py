"""Util Functions."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import orth, subspace_angles
from scipy.stats import linregress

from pyjsep.errors import BadDimension

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

__all__ = [
    "RateFit",
    "as_columns",
    "compound_matrix",
    "fit_exponential_rate",
    "orthonormal_span",
    "principal_angles",
    "sample_unit_sphere",
    "spectral_norm",
    "symmetric_part",
]


def as_columns(vectors: ArrayLike, dim: int | None = None) -> NDArray:
    """Arrange a vector or a set of vectors as the columns of a matrix.

    A 1-D input becomes a single column. A 2-D input is read column-wise unless
    only its rows have length ``dim``.

    >>> as_columns([1.0, 2.0]).shape
    (2, 1)
    >>> as_columns([[1.0, 2.0, 0.0]], dim=3).shape
    (3, 1)

    Parameters
    ----------
    vectors:
        A vector, or a 2-D array of vectors
    dim:
        Ambient dimension used to disambiguate row-stacked input

    Returns
    -------
    NDArray:
        Matrix whose columns are the input vectors

    """
    arr = np.array(vectors, dtype=float)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"Expected a vector or a 2-D array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim and arr.shape[1] == dim:
        return arr.T.copy()
    return arr


def orthonormal_span(vectors: ArrayLike, dim: int | None = None) -> NDArray:
    """Orthonormal (Euclidean) basis of the span of ``vectors``.

    >>> np.abs(orthonormal_span([[3.0], [4.0]])).ravel().round(6)
    array([0.6, 0.8])

    """
    return orth(as_columns(vectors, dim))


def principal_angles(first: ArrayLike, second: ArrayLike) -> NDArray:
    """Principal angles (radians, descending) between two column spans."""
    return subspace_angles(as_columns(first), as_columns(second))


def spectral_norm(mat: ArrayLike) -> float:
    """Largest singular value of a matrix."""
    arr = np.asarray(mat, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, ord=2))


def symmetric_part(mat: ArrayLike) -> NDArray:
    """Return (M + Mᵀ)/2.

    >>> symmetric_part([[0.0, 2.0], [0.0, 1.0]])
    array([[0., 1.],
           [1., 1.]])

    """
    arr = np.asarray(mat, dtype=float)
    return 0.5 * (arr + arr.T)


def compound_matrix(mat: ArrayLike, p: int) -> NDArray:
    """Compute the p-th compound (exterior power) of a matrix.

    Entry ``(I, J)`` is the minor of ``mat`` on the row subset ``I`` and the
    column subset ``J``; subsets are ordered lexicographically so that
    ``compound_matrix(A @ B, p) == compound_matrix(A, p) @ compound_matrix(B, p)``.

    >>> np.diag(compound_matrix(np.diag([1.0, 2.0, 3.0]), 2))
    array([2., 3., 6.])
    >>> compound_matrix(np.diag([1.0, 2.0, 3.0]), 3)
    array([[6.]])

    Parameters
    ----------
    mat:
        An ``m x n`` matrix
    p:
        Order of the compound, ``1 <= p <= min(m, n)``

    Returns
    -------
    NDArray:
        The ``C(m, p) x C(n, p)`` compound matrix

    """
    arr = np.asarray(mat, dtype=float)
    n_rows, n_cols = arr.shape
    if not 1 <= p <= min(n_rows, n_cols):
        raise BadDimension(f"Compound order {p} outside [1, {min(n_rows, n_cols)}]")
    row_idx = np.array(list(combinations(range(n_rows), p)))
    col_idx = np.array(list(combinations(range(n_cols), p)))
    minors = arr[row_idx[:, None, :, None], col_idx[None, :, None, :]]
    return np.linalg.det(minors)


def sample_unit_sphere(dim: int, count: int, seed: int | None = 0) -> NDArray:
    """Draw ``count`` quasi-uniform unit vectors in ``dim`` dimensions.

    Rows of the returned array are the samples; the same ``seed`` always
    produces the same samples.

    >>> pts = sample_unit_sphere(3, 5, seed=1)
    >>> pts.shape
    (5, 3)
    >>> bool(np.allclose(np.linalg.norm(pts, axis=1), 1.0))
    True

    """
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((count, dim))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit ``y(t) ~ intercept + slope * t``.

    Attributes
    ----------
    slope: float
        Fitted exponential rate (1/time).
    intercept: float
        Fitted log-prefactor.
    stderr: float
        Standard error of the slope.
    n_points: int
        Number of samples used by the fit.

    """

    slope: float
    intercept: float
    stderr: float
    n_points: int

    def significant(self, factor: float = 3.0) -> bool:
        """Return True when ``|slope|`` exceeds ``factor`` standard errors."""
        return abs(self.slope) > factor * self.stderr


def fit_exponential_rate(
    times: ArrayLike, log_values: ArrayLike, discard_fraction: float = 0.5
) -> RateFit:
    """Fit the exponential rate of a log-quantity, skipping the transient.

    >>> t = np.linspace(0.0, 4.0, 41)
    >>> fit = fit_exponential_rate(t, 0.5 - 2.0 * t)
    >>> round(fit.slope, 8), round(fit.intercept, 8)
    (-2.0, 0.5)

    Parameters
    ----------
    times:
        Sample times
    log_values:
        Logarithm of the monitored quantity at each time
    discard_fraction:
        Leading fraction of the window dropped as transient

    Returns
    -------
    RateFit:
        The fitted rate and diagnostics

    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(log_values, dtype=float)
    start = int(np.floor(discard_fraction * len(t)))
    start = min(start, max(len(t) - 3, 0))
    t, y = t[start:], y[start:]
    if len(t) < 3:
        raise ValueError("At least three samples are needed to fit a rate")
    res = linregress(t, y)
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    return RateFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        stderr=stderr,
        n_points=len(t),
    )
