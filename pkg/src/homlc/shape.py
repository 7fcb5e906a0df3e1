"""Estimating the centre and the body from data.

Two estimators are offered: a covariance-whitening one that maps a
reference body through the symmetric square root of the sample covariance,
and a random-direction hull that averages the Euclidean norms of the data
points lying furthest out along each direction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SingularCovarianceError
from .geometry import ConvexBody, LinearImage, PointHull

EIG_FLOOR_REL = 1e-10


@dataclass(frozen=True)
class ScatterEstimate:
    """Sample mean and the symmetric square root of the sample covariance."""

    mean: np.ndarray
    sqrt_cov: np.ndarray
    inv_sqrt_cov: np.ndarray
    eigenvalues: np.ndarray

    @property
    def cov(self):
        return self.sqrt_cov @ self.sqrt_cov


def _as_data(data, min_rows=1):
    X = np.array(data, dtype=float, ndmin=2)
    if X.ndim != 2:
        raise InputError("data must be a two-dimensional array")
    if X.shape[0] < min_rows:
        raise InputError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise InputError("data must be finite")
    return X


def scatter(data) -> ScatterEstimate:
    """Mean and symmetric covariance root by eigendecomposition.

    Eigenvalues below ``1e-10`` times the largest are raised to that floor.
    The covariance uses the ``1/n`` normalisation.

    Raises
    ------
    SingularCovarianceError
        If ``n <= p`` or the covariance is zero.
    """
    X = _as_data(data)
    n, p = X.shape
    if n <= p:
        raise SingularCovarianceError(f"need more rows than columns for a covariance (n={n}, p={p})")
    mu = X.mean(axis=0)
    C = X - mu
    S = (C.T @ C) / n
    S = 0.5 * (S + S.T)
    lam, U = np.linalg.eigh(S)
    top = float(lam[-1])
    if not top > 0:
        raise SingularCovarianceError("sample covariance is zero")
    lam = np.maximum(lam, EIG_FLOOR_REL * top)
    root = np.sqrt(lam)
    sq = (U * root) @ U.T
    isq = (U / root) @ U.T
    return ScatterEstimate(mu, 0.5 * (sq + sq.T), 0.5 * (isq + isq.T), lam)


def estimate_scatter(data, K0: ConvexBody):
    """Return ``(ScatterEstimate, sqrt_cov @ K0)``."""
    est = scatter(data)
    if K0.p != est.mean.size:
        raise InputError(f"reference body has p={K0.p} but data has {est.mean.size} columns")
    return est, LinearImage(est.sqrt_cov, K0)


def whiten(data):
    """Centre and decorrelate: rows become ``inv_sqrt_cov @ (x - mean)``."""
    est = scatter(data)
    X = np.asarray(data, dtype=float)
    return (X - est.mean) @ est.inv_sqrt_cov.T, est


def default_hull_params(n: int, p: int):
    """``(k, M)`` with ``k = max(1, floor(log n))`` and ``M = ceil(n^((p-1)/(p+1)))``."""
    if n < 1 or p < 1:
        raise InputError("n and p must be positive")
    k = max(1, int(math.floor(math.log(n))))
    M = int(math.ceil(n ** ((p - 1) / (p + 1)) - 1e-12))
    return k, max(M, 1)


def hull_boundary_points(data, directions_data, k: int):
    """Per-direction boundary estimates ``t_m * theta_m``.

    For each unit direction ``theta_m`` the set ``I_m`` holds the points whose
    projection on ``theta_m`` is at least their k-th largest projection over
    all directions; ``t_m`` is the mean Euclidean norm over ``I_m``.
    Directions with empty ``I_m`` are dropped with a warning.
    """
    X = _as_data(data)
    D = _as_data(directions_data)
    if D.shape[1] != X.shape[1]:
        raise InputError("data and directions must have the same number of columns")
    norms = np.linalg.norm(D, axis=1)
    if np.any(norms == 0):
        raise InputError("direction rows must be non-zero")
    M = D.shape[0]
    if not 1 <= int(k) <= M:
        raise InputError(f"k must lie in [1, M={M}], got {k}")
    theta = D / norms[:, None]
    proj = X @ theta.T                                   # n x M
    kth = np.partition(proj, M - int(k), axis=1)[:, M - int(k)]
    member = proj >= kth[:, None]
    counts = member.sum(axis=0)
    xnorm = np.linalg.norm(X, axis=1)
    keep = counts > 0
    if not np.all(keep):
        warnings.warn(f"{int(np.sum(~keep))} hull directions had no assigned points and were dropped",
                      RuntimeWarning, stacklevel=2)
    # sorted accumulation keeps the result independent of row order
    t = np.array([math.fsum(np.sort(xnorm[member[:, m]])) / counts[m] if keep[m] else 0.0
                  for m in range(M)])
    return (t[:, None] * theta)[keep]


def estimate_hull(data, directions_data, k: int) -> PointHull:
    """Convex hull of :func:`hull_boundary_points`; validated to contain 0 inside."""
    return PointHull(hull_boundary_points(data, directions_data, k))
