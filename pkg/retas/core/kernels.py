# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas

"""
Parametric building blocks of the RETAS intensity.

Renewal hazard of gamma waiting times, modified Omori temporal response,
Gaussian spatial response, exponential boost and the shifted-exponential
magnitude law. Every function here is pure and accepts numpy arrays.
"""

from typing import NamedTuple

import numpy as np
from scipy import special

from retas.helpers import DataError, DomainError, MagnitudeParams, RetasParams, SpatialWindow

LOG_2PI = np.log(2.0 * np.pi)

_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_CF_TINY = 1e-300


def _log_gamma_cf(x: np.ndarray, k: float) -> np.ndarray:
    """log Γ(x, k) by a modified Lentz continued fraction, valid for x >= k + 1."""
    b = x + 1.0 - k
    c = np.full_like(x, 1.0 / _CF_TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAX_ITER + 1):
        an = -i * (i - k)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _CF_EPS):
            break
    return -x + k * np.log(x) + np.log(h)


def log_upper_incomplete_gamma(x, k: float):
    """log Γ(x, k) = log ∫_x^∞ s^(k-1) e^(-s) ds, stable where Γ(x, k) underflows."""
    if not k > 0:
        raise DomainError(f"Incomplete gamma shape must be positive, got {k}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("Incomplete gamma lower limit must be nonnegative")
    q = special.gammaincc(k, x)
    with np.errstate(divide="ignore"):
        out = np.log(q) + special.gammaln(k)
    tail = (q < 1e-280) & (x >= k + 1.0)
    if np.any(tail):
        out = np.array(out, dtype=float, copy=True)
        out[tail] = _log_gamma_cf(np.atleast_1d(x[tail]), k)
    return out[()] if np.ndim(out) == 0 else out


def upper_incomplete_gamma(x, k: float):
    """Γ(x, k) = ∫_x^∞ s^(k-1) e^(-s) ds; Γ(0, k) is the complete gamma function."""
    return np.exp(log_upper_incomplete_gamma(x, k))


class GammaRenewal:
    """
    Gamma waiting-time law of the main-shock renewal process.

    Other renewal laws only need `log_hazard`, `cumulative_hazard` and
    `sample` with the same signatures.
    """

    def __init__(self, kappa: float, beta: float):
        if not (kappa > 0 and beta > 0):
            raise DomainError(f"Gamma renewal needs kappa > 0 and beta > 0, got {kappa}, {beta}")
        self.kappa = float(kappa)
        self.beta = float(beta)

    def log_survival(self, u):
        """log P(W > u); -H(u)."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("Renewal survival needs nonnegative elapsed time")
        z = u / self.beta
        lower = special.gammainc(self.kappa, z)
        with np.errstate(divide="ignore"):
            head = np.log1p(-np.minimum(lower, 0.5))
        out = np.where(
            lower < 0.5,
            head,
            log_upper_incomplete_gamma(z, self.kappa) - special.gammaln(self.kappa),
        )
        return out[()] if np.ndim(out) == 0 else out

    def cumulative_hazard(self, u):
        """H(u) = ∫_0^u μ(s) ds = log Γ(κ) - log Γ(u/β, κ)."""
        return -self.log_survival(u)

    def log_hazard(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise DomainError("Renewal hazard needs positive elapsed time")
        k, b = self.kappa, self.beta
        out = (k - 1.0) * np.log(u) - u / b - k * np.log(b) - log_upper_incomplete_gamma(u / b, k)
        return out[()] if np.ndim(out) == 0 else out

    def hazard(self, u):
        return np.exp(self.log_hazard(u))

    def mean(self) -> float:
        return self.kappa * self.beta

    def sd(self) -> float:
        return self.beta * np.sqrt(self.kappa)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.kappa, self.beta, size=size)


def renewal_law(params: RetasParams) -> GammaRenewal:
    return GammaRenewal(params.kappa, params.beta)


def renewal_hazard(t, params: RetasParams):
    """μ(t) = t^(κ-1) e^(-t/β) / (Γ(t/β, κ) β^κ)."""
    return renewal_law(params).hazard(t)


def renewal_hazard_integral(a, b, params: RetasParams):
    """∫_a^b μ(s) ds by the cumulative-hazard identity."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(a > b):
        raise DomainError("Hazard integral needs 0 <= a <= b")
    law = renewal_law(params)
    out = np.where(a == b, 0.0, law.log_survival(a) - law.log_survival(b))
    return out[()] if np.ndim(out) == 0 else out


def _check_omori(params: RetasParams) -> None:
    if not (params.p > 1 and params.c > 0):
        raise DomainError(f"Omori law needs p > 1 and c > 0, got p={params.p}, c={params.c}")


def log_omori_density(t, params: RetasParams):
    _check_omori(params)
    t = np.asarray(t, dtype=float)
    p, c = params.p, params.c
    return np.log(p - 1.0) - np.log(c) - p * np.log1p(t / c)


def omori_density(t, params: RetasParams):
    """g(t) = ((p-1)/c)(1 + t/c)^(-p)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("Omori density needs a positive lag")
    return np.exp(log_omori_density(t, params))


def omori_cdf(t, params: RetasParams):
    """G(t) = 1 - (1 + t/c)^(1-p); G(∞) = 1."""
    _check_omori(params)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("Omori CDF needs a nonnegative lag")
    return -np.expm1((1.0 - params.p) * np.log1p(t / params.c))


def _check_spatial(params: RetasParams) -> None:
    if not (params.sigma1_sq > 0 and params.sigma2_sq > 0):
        raise DomainError("Spatial response needs positive variances")


def log_spatial_density(dx, dy, params: RetasParams):
    _check_spatial(params)
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    s1, s2 = params.sigma1_sq, params.sigma2_sq
    return -LOG_2PI - 0.5 * np.log(s1 * s2) - 0.5 * (dx * dx / s1 + dy * dy / s2)


def spatial_density(dx, dy, params: RetasParams):
    """Bivariate normal with independent marginals (σ1², σ2²)."""
    return np.exp(log_spatial_density(dx, dy, params))


def spatial_mass(cx, cy, window: SpatialWindow, params: RetasParams):
    """Probability mass of the spatial response centred at (cx, cy) inside the window."""
    _check_spatial(params)
    return gaussian_window_mass(cx, cy, params.sigma1_sq, params.sigma2_sq, window)


def gaussian_window_mass(cx, cy, var_x: float, var_y: float, window: SpatialWindow):
    """Mass inside the window of independent normals centred at (cx, cy)."""
    cx = np.asarray(cx, dtype=float)
    cy = np.asarray(cy, dtype=float)
    if window.is_whole_plane:
        return np.ones(np.broadcast(cx, cy).shape)[()]

    def axis(lo, hi, centre, var):
        s = np.sqrt(var)
        a = (lo - centre) / s
        b = (hi - centre) / s
        # take the difference on the side with the smaller tail
        upper = special.ndtr(b) - special.ndtr(a)
        lower = special.ndtr(-a) - special.ndtr(-b)
        return np.where(a > 0, lower, upper)

    mx = axis(window.x_min, window.x_max, cx, var_x)
    my = axis(window.y_min, window.y_max, cy, var_y)
    return np.clip(mx * my, 0.0, 1.0)


def log_boost(m, params: RetasParams, m0: float):
    m = np.asarray(m, dtype=float)
    if np.any(m < m0):
        raise DomainError("Boost function needs m >= m0")
    with np.errstate(divide="ignore"):
        return np.log(params.A) + params.alpha * (m - m0)


def boost(m, params: RetasParams, m0: float):
    """k(m) = A e^(α(m - m0)), the expected number of direct offspring."""
    m = np.asarray(m, dtype=float)
    if np.any(m < m0):
        raise DomainError("Boost function needs m >= m0")
    return params.A * np.exp(params.alpha * (m - m0))


def magnitude_density(m, mag: MagnitudeParams):
    """J(m) = γ e^(-γ(m - m0)) for m >= m0."""
    m = np.asarray(m, dtype=float)
    if np.any(m < mag.m0):
        raise DomainError("Magnitude density needs m >= m0")
    return mag.gamma * np.exp(-mag.gamma * (m - mag.m0))


def magnitude_loglik(catalog, mag: MagnitudeParams) -> float:
    if catalog.n == 0:
        raise DataError("Magnitude log-likelihood of an empty catalog")
    excess = np.asarray(catalog.m) - mag.m0
    if np.any(excess < 0):
        raise DomainError("Magnitude log-likelihood needs m >= m0")
    return float(catalog.n * np.log(mag.gamma) - mag.gamma * excess.sum())


def magnitude_mle(catalog) -> MagnitudeParams:
    """Closed-form MLE γ = n / Σ(m_i - m0)."""
    if catalog.n == 0:
        raise DataError("Magnitude MLE of an empty catalog")
    total = float(np.sum(np.asarray(catalog.m) - catalog.m0))
    if not total > 0:
        raise DataError("All magnitudes equal m0; the magnitude rate is unbounded")
    return MagnitudeParams(gamma=catalog.n / total, m0=catalog.m0)


class Productivity(NamedTuple):
    value: float
    supercritical: bool


def productivity(params: RetasParams, gamma: float) -> Productivity:
    """Mean number of direct offspring, Aγ/(γ - α); +inf when γ <= α."""
    if gamma <= params.alpha:
        return Productivity(np.inf, True)
    value = params.A * gamma / (gamma - params.alpha)
    return Productivity(float(value), bool(value >= 1.0))
