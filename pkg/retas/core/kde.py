# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import numpy as np
from scipy import linalg

from retas import logger
from retas.helpers import BandwidthMatrix, DataError, DomainError

_CHUNK = 4096


def _whitener(h: BandwidthMatrix) -> np.ndarray:
    """W = L⁻¹ for the Cholesky factor h = LLᵀ, so that |W d|² = dᵀh⁻¹d."""
    chol = linalg.cholesky(h.as_matrix(), lower=True)
    return linalg.inv(chol)


def _quad_forms(points: np.ndarray, qx: np.ndarray, qy: np.ndarray, whiten: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distances, shape (len(qx), len(points))."""
    dx = qx[:, None] - points[None, :, 0]
    dy = qy[:, None] - points[None, :, 1]
    u = whiten[0, 0] * dx + whiten[0, 1] * dy
    v = whiten[1, 0] * dx + whiten[1, 1] * dy
    return u * u + v * v


class WeightedKde:
    """
    Weighted Gaussian kernel density estimate on the plane.

    Each point carries a nonnegative weight (the main-shock probability of
    the event in the semiparametric fit); the estimate integrates to one.
    """

    def __init__(self, points, weights, h: BandwidthMatrix):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        weights = np.asarray(weights, dtype=float)
        if points.shape[0] != weights.shape[0]:
            raise DataError(f"KDE got {points.shape[0]} points but {weights.shape[0]} weights")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("KDE weights must be finite and nonnegative")
        total = float(weights.sum())
        if not total > 0:
            raise DomainError("KDE weights sum to zero")
        self.points = points
        self.weights = weights
        self.h = h
        self.weight_sum = total
        self._whiten = _whitener(h)
        self._norm = 1.0 / (2.0 * np.pi * np.sqrt(h.det))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        qx, qy = x.ravel(), y.ravel()
        out = np.empty(qx.size)
        for start in range(0, qx.size, _CHUNK):
            stop = start + _CHUNK
            r2 = _quad_forms(self.points, qx[start:stop], qy[start:stop], self._whiten)
            out[start:stop] = np.exp(-0.5 * r2) @ self.weights
        out *= self._norm / self.weight_sum
        return out.reshape(x.shape)[()]

    __call__ = evaluate

    def grid(self, xs, ys) -> np.ndarray:
        """Density on the grid xs × ys; rows follow ys, columns follow xs."""
        gx, gy = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        return self.evaluate(gx, gy)

    def with_weights(self, weights) -> "WeightedKde":
        return WeightedKde(self.points, weights, self.h)


def default_bandwidth(catalog) -> BandwidthMatrix:
    """Bivariate normal-reference bandwidth h = n^(-1/3) Σ̂ (the d=2 constant is 1)."""
    if catalog.n < 2:
        raise DataError("Bandwidth selection needs at least two events")
    pts = np.column_stack([catalog.x, catalog.y])
    sigma = np.cov(pts, rowvar=False)
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] ** 2
    if not (sigma[0, 0] > 0 and det > 1e-12 * max(sigma[0, 0] * sigma[1, 1], np.finfo(float).tiny)):
        raise DataError("Epicentres are degenerate (collinear or identical); cannot choose a bandwidth")
    h = BandwidthMatrix.from_matrix(catalog.n ** (-1.0 / 3.0) * sigma)
    logger.debug(f"Normal-reference bandwidth for n={catalog.n}: {h.to_dict()}")
    return h


def kde_evaluate(kde: WeightedKde, x, y):
    return kde.evaluate(x, y)


def kde_dof(points, h: BandwidthMatrix) -> float:
    """
    Effective degrees of freedom, the trace of the KDE hat matrix.

    The kernel at zero distance is the same for every point, so the
    result does not depend on the weights.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        raise DataError("Degrees of freedom of an empty point set")
    whiten = _whitener(h)
    total = 0.0
    for start in range(0, points.shape[0], _CHUNK):
        block = points[start:start + _CHUNK]
        r2 = _quad_forms(points, block[:, 0], block[:, 1], whiten)
        total += float(np.sum(1.0 / np.exp(-0.5 * r2).sum(axis=1)))
    return total


def aicc(loglik: float, k: float, n: int) -> float:
    """-2ℓ + 2nk/(n - k - 1)."""
    if not n > k + 1:
        raise DomainError(f"AICc is undefined for n={n}, k={k:.6g} (needs n > k + 1)")
    return -2.0 * loglik + 2.0 * n * k / (n - k - 1.0)
