# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas

"""
Forward filtering pass of the RETAS model.

Events are indexed from 0 in code. Row r of the triangular arrays refers
to the waiting interval (t_{r-1}, t_r] that ends with event r, and column
j < r to the candidate index of the latest main shock before t_r. Row n
is the final interval (t_{n-1}, T].
"""

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Protocol

import numpy as np
from scipy import special

from retas import logger
from retas.core import kernels
from retas.core.catalog import Catalog
from retas.core.kde import WeightedKde
from retas.helpers import (DataError, DomainError, NumericalError, RetasParams,
                           SpatialWindow)

BRUTE_FORCE_MAX_EVENTS = 10
_ENUM_CHUNK = 65536


def logsumexp(a, axis=None):
    with np.errstate(divide="ignore", invalid="ignore"):
        return special.logsumexp(a, axis=axis)


class BackgroundIntensity(Protocol):
    def evaluate(self, x, y): ...

    def log_evaluate(self, x, y): ...


class _Background:
    def log_evaluate(self, x, y):
        with np.errstate(divide="ignore"):
            return np.log(self.evaluate(x, y))


class ParametricBackground(_Background):
    """Bivariate normal background with independent marginals, renormalized to a window."""

    def __init__(self, mean_x: float, mean_y: float, var_x: float, var_y: float,
                 window: Optional[SpatialWindow] = None):
        if not (var_x > 0 and var_y > 0):
            raise DomainError("Background variances must be positive")
        self.mean_x, self.mean_y = float(mean_x), float(mean_y)
        self.var_x, self.var_y = float(var_x), float(var_y)
        self.window = window or SpatialWindow.whole_plane()
        self.mass = float(kernels.gaussian_window_mass(
            self.mean_x, self.mean_y, self.var_x, self.var_y, self.window
        ))
        if not self.mass > 0:
            raise DomainError("Background has no mass inside the spatial window")

    def evaluate(self, x, y):
        dx = np.asarray(x, dtype=float) - self.mean_x
        dy = np.asarray(y, dtype=float) - self.mean_y
        dens = np.exp(-0.5 * (dx * dx / self.var_x + dy * dy / self.var_y))
        return dens / (2.0 * np.pi * np.sqrt(self.var_x * self.var_y) * self.mass)

    def to_dict(self) -> dict:
        return {
            "kind": "parametric",
            "means": [self.mean_x, self.mean_y],
            "variances": [self.var_x, self.var_y],
            "window": self.window.to_dict(),
        }


class KdeBackground(_Background):
    def __init__(self, kde: WeightedKde):
        self.kde = kde

    def evaluate(self, x, y):
        return self.kde.evaluate(x, y)

    def to_dict(self) -> dict:
        return {"kind": "kde", "n": self.kde.n, "h": self.kde.h.to_dict()}


class ConstantBackground(_Background):
    def __init__(self, level: float):
        if not level > 0:
            raise DomainError(f"Constant background level must be positive, got {level}")
        self.level = float(level)

    @classmethod
    def uniform(cls, window: SpatialWindow) -> "ConstantBackground":
        if window.is_whole_plane:
            raise DomainError("A uniform background needs a bounded window")
        area = (window.x_max - window.x_min) * (window.y_max - window.y_min)
        return cls(1.0 / area)

    def evaluate(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.full(x.shape, self.level)[()]

    def to_dict(self) -> dict:
        return {"kind": "constant", "level": self.level}


def _lower(n: int, fill: float = -np.inf) -> np.ndarray:
    return np.full((n, n), fill)


@dataclass
class PairTerms:
    """
    Pairwise kernel terms of one (catalog, params, ν) triple.

    log_mu[r, j]  log μ(t_r - t_j)
    log_S[r, j]   -∫_{t_{r-1}}^{t_r} μ(s - t_j) ds
    log_psi[r, j] log k(m_j) g(t_r - t_j) f(x_r - x_j, y_r - y_j)
    All are -inf outside the strict lower triangle.
    """

    n: int
    log_mu: np.ndarray
    log_S: np.ndarray
    log_S_end: np.ndarray
    log_psi: np.ndarray
    log_phi: np.ndarray
    log_nu: np.ndarray
    log_mu_first: float
    log_S_first: float
    Phi_T: float

    @classmethod
    def build(cls, catalog: Catalog, params: RetasParams, nu: BackgroundIntensity,
              log_nu: Optional[np.ndarray] = None) -> "PairTerms":
        params.check()
        n = catalog.n
        if n == 0:
            raise DataError("Cannot evaluate the likelihood of an empty catalog")
        t, x, y, m = catalog.t, catalog.x, catalog.y, catalog.m
        if not t[0] > 0:
            raise DomainError("The first event must occur strictly after the time origin")
        law = kernels.renewal_law(params)

        rows, cols = np.tril_indices(n, -1)
        lag = t[rows] - t[cols]

        H = np.zeros((n, n))
        H[rows, cols] = law.cumulative_hazard(lag)
        log_mu = _lower(n)
        log_mu[rows, cols] = law.log_hazard(lag)
        log_S = _lower(n)
        # H[r-1, r-1] = 0 covers the newest candidate j = r - 1
        log_S[rows, cols] = H[rows - 1, cols] - H[rows, cols]

        log_S_end = -(law.cumulative_hazard(catalog.T - t) - H[n - 1, :])

        log_psi = _lower(n)
        log_psi[rows, cols] = (
            kernels.log_boost(m[cols], params, catalog.m0)
            + kernels.log_omori_density(lag, params)
            + kernels.log_spatial_density(x[rows] - x[cols], y[rows] - y[cols], params)
        )
        log_phi = logsumexp(log_psi, axis=1)
        log_phi[0] = -np.inf

        if log_nu is None:
            log_nu = nu.log_evaluate(x, y)
        log_nu = np.asarray(log_nu, dtype=float)
        return cls(
            n=n,
            log_mu=log_mu,
            log_S=log_S,
            log_S_end=np.asarray(log_S_end, dtype=float),
            log_psi=log_psi,
            log_phi=log_phi,
            log_nu=log_nu,
            log_mu_first=float(law.log_hazard(t[0])),
            log_S_first=float(-law.cumulative_hazard(t[0])),
            Phi_T=excitation_compensator(catalog.T, catalog, params),
        )


def excitation(t: float, x: float, y: float, catalog: Catalog, params: RetasParams) -> float:
    """φ(t, x, y): summed triggering from events strictly before t."""
    if not t > 0:
        raise DomainError("Excitation needs t > 0")
    past = catalog.t < t
    if not past.any():
        return 0.0
    lag = t - catalog.t[past]
    terms = (
        kernels.boost(catalog.m[past], params, catalog.m0)
        * kernels.omori_density(lag, params)
        * kernels.spatial_density(x - catalog.x[past], y - catalog.y[past], params)
    )
    return float(terms.sum())


def excitation_compensator(t: float, catalog: Catalog, params: RetasParams,
                           window: Optional[SpatialWindow] = None) -> float:
    """Φ(t) = Σ_{t_j < t} k(m_j) G(t - t_j) · mass of the response inside the window."""
    if t < 0:
        raise DomainError("Compensator needs t >= 0")
    window = window or catalog.window
    past = catalog.t < t
    if not past.any():
        return 0.0
    terms = (
        kernels.boost(catalog.m[past], params, catalog.m0)
        * kernels.omori_cdf(t - catalog.t[past], params)
        * kernels.spatial_mass(catalog.x[past], catalog.y[past], window, params)
    )
    return float(terms.sum())


@dataclass
class FilterState:
    """Output of `forward_filter`; `log_p[r, :r]` is the filtered distribution before event r."""

    log_p: np.ndarray
    log_d: np.ndarray
    log_d_first: float
    loglik: float
    terms: PairTerms

    @property
    def n(self) -> int:
        return self.terms.n

    @property
    def p(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_p)

    @property
    def log_S(self) -> np.ndarray:
        return self.terms.log_S

    @property
    def phi(self) -> np.ndarray:
        return np.exp(self.terms.log_phi)

    @property
    def Phi_T(self) -> float:
        return self.terms.Phi_T


def forward_filter(catalog: Catalog, params: RetasParams, nu: BackgroundIntensity,
                   terms: Optional[PairTerms] = None) -> FilterState:
    """
    Exact RETAS log-likelihood by forward filtering.

    The magnitude term is not included; see `kernels.magnitude_loglik`.
    """
    terms = terms or PairTerms.build(catalog, params, nu)
    n = terms.n
    log_p = np.full((n + 1, n), -np.inf)
    log_d = _lower(n)

    log_d_first = terms.log_mu_first + terms.log_nu[0] + terms.log_S_first
    if not np.isfinite(log_d_first):
        raise NumericalError("Non-finite likelihood contribution at event 1")
    loglik = log_d_first
    if n > 1:
        log_p[1, 0] = 0.0

    for r in range(1, n):
        lp = log_p[r, :r]
        main = terms.log_mu[r, :r] + terms.log_nu[r] + terms.log_S[r, :r]
        after = terms.log_phi[r] + terms.log_S[r, :r]
        log_d[r, :r] = np.logaddexp(main, after)
        z = logsumexp(lp + log_d[r, :r])
        if not np.isfinite(z):
            raise NumericalError(f"Non-finite likelihood contribution at event {r + 1}")
        loglik += z

        nxt = log_p[r + 1, : r + 1]
        nxt[:r] = lp + after
        nxt[r] = logsumexp(lp + main)
        nxt -= logsumexp(nxt)

    tail = logsumexp(log_p[n, :n] + terms.log_S_end) if n > 1 else terms.log_S_end[0]
    loglik += tail - terms.Phi_T
    if not np.isfinite(loglik):
        raise NumericalError("Non-finite log-likelihood after the final interval")
    logger.debug(f"Forward filter: n={n}, loglik={loglik:.10g}")
    return FilterState(log_p=log_p, log_d=log_d, log_d_first=float(log_d_first),
                       loglik=float(loglik), terms=terms)


def etas_loglik(catalog: Catalog, mu0: float, params: RetasParams, nu: BackgroundIntensity) -> float:
    """Constant-background ETAS log-likelihood, Σ log(μ0 ν_i + φ_i) - μ0 T - Φ(T)."""
    if not mu0 > 0:
        raise DomainError("ETAS background rate must be positive")
    nu_i = np.asarray(nu.evaluate(catalog.x, catalog.y), dtype=float)
    total = 0.0
    for i, ev in enumerate(catalog):
        phi = excitation(ev.t, ev.x, ev.y, catalog, params) if i else 0.0
        total += np.log(mu0 * nu_i[i] + phi)
    return float(total - mu0 * catalog.T - excitation_compensator(catalog.T, catalog, params))


@dataclass
class BranchingChunk:
    """
    A block of enumerated branching vectors.

    parent[v, i] is -1 for a main shock and the parent index otherwise;
    last_main[v, i] is the index of the latest main shock before event i
    (-1 for the time origin).
    """

    parent: np.ndarray
    last_main: np.ndarray
    log_density: np.ndarray


def _check_enumerable(catalog: Catalog, limit: int) -> None:
    if catalog.n == 0:
        raise DataError("Cannot enumerate branchings of an empty catalog")
    if catalog.n > limit:
        raise DataError(f"Enumeration is limited to {limit} events, got {catalog.n}")


def iter_branchings(catalog: Catalog, params: RetasParams, nu: BackgroundIntensity,
                    limit: int = BRUTE_FORCE_MAX_EVENTS) -> Iterator[BranchingChunk]:
    """Enumerate every branching structure with its complete-data log density."""
    _check_enumerable(catalog, limit)
    params.check()
    n = catalog.n
    law = kernels.renewal_law(params)
    t, x, y, m = catalog.t, catalog.x, catalog.y, catalog.m

    # renewal terms between main shocks; column n is the time origin
    tt = np.append(t, 0.0)
    log_mu = np.full((n, n + 1), -np.inf)
    H = np.zeros((n, n + 1))
    H_end = np.asarray(law.cumulative_hazard(catalog.T - tt), dtype=float)
    for i in range(n):
        for a in list(range(i)) + [n]:
            log_mu[i, a] = law.log_hazard(t[i] - tt[a])
            H[i, a] = law.cumulative_hazard(t[i] - tt[a])
    log_trig = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(i):
            with np.errstate(divide="ignore"):
                log_trig[i, j] = np.log(
                    kernels.boost(m[j], params, catalog.m0)
                    * kernels.omori_density(t[i] - t[j], params)
                    * kernels.spatial_density(x[i] - x[j], y[i] - y[j], params)
                )
    log_nu = np.asarray(nu.log_evaluate(x, y), dtype=float)
    Phi_T = excitation_compensator(catalog.T, catalog, params)

    choices = [range(-1, i) for i in range(1, n)]
    vectors = itertools.product(*choices)
    rows = np.arange(n)
    while True:
        block = list(itertools.islice(vectors, _ENUM_CHUNK))
        if not block:
            break
        parent = np.full((len(block), n), -1, dtype=np.int64)
        if n > 1:
            parent[:, 1:] = np.asarray(block, dtype=np.int64)
        is_main = parent < 0
        marker = np.where(is_main, rows, -1)
        running = np.maximum.accumulate(marker, axis=1)
        last_main = np.full_like(parent, -1)
        last_main[:, 1:] = running[:, :-1]
        origin = np.where(last_main < 0, n, last_main)

        main_term = log_mu[rows, origin] + log_nu[rows] - H[rows, origin]
        trig_term = log_trig[rows, np.where(is_main, 0, parent)]
        log_density = np.where(is_main, main_term, trig_term).sum(axis=1)

        final_main = running[:, -1]
        log_density = log_density - H_end[final_main] - Phi_T
        yield BranchingChunk(parent=parent, last_main=last_main, log_density=log_density)


def brute_force_loglik(catalog: Catalog, params: RetasParams, nu: BackgroundIntensity) -> float:
    """Log of the complete-data density summed over all branching structures."""
    parts = [logsumexp(chunk.log_density) for chunk in iter_branchings(catalog, params, nu)]
    return float(logsumexp(np.asarray(parts)))
