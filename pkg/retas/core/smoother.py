# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas

"""
Backward smoothing and declustering.

Probabilities use the row convention of `retas.core.likelihood`: row r
refers to event r, column j < r to an earlier event.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from retas import logger
from retas.core.catalog import Catalog
from retas.core.likelihood import (BackgroundIntensity, FilterState,
                                   forward_filter, iter_branchings, logsumexp)
from retas.helpers import NumericalError, RetasParams

BRUTE_FORCE_DECLUSTER_MAX_EVENTS = 8
PI_EXPORT_FLOOR = 1e-12


class DeclusterMode(str, Enum):
    SMOOTHED = "smoothed"
    FILTERED = "filtered"


@dataclass
class DeclusterResult:
    """
    Main-shock and parent probabilities for every event.

    omega[0] is 1 since the first event has no candidate parent.
    pi[r, j] = P(event j triggered event r). In filtered mode `q` holds the
    latest-main-shock distribution given the history through event r.
    """

    q: np.ndarray
    omega_ij: np.ndarray
    omega: np.ndarray
    pi: np.ndarray
    mode: DeclusterMode
    log_f: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.omega.size

    def mainshock_count(self, threshold: float = 0.5) -> int:
        return int(np.sum(self.omega > threshold))

    def expected_mainshocks(self) -> float:
        return float(self.omega.sum())

    def pi_entries(self, floor: float = PI_EXPORT_FLOOR):
        """Sparse (event, parent, probability) triples above the floor."""
        rows, cols = np.nonzero(self.pi > floor)
        return rows, cols, self.pi[rows, cols]


def backward_messages(state: FilterState) -> np.ndarray:
    """
    Row-normalized log backward messages log f[r, :r] for r = n..1.

    Row r + 1 keeps the relative scale between f[r+1, j] and f[r+1, r],
    which is all that the decluster formulas need.
    """
    terms = state.terms
    n = terms.n
    log_f = np.full((n + 1, n), -np.inf)
    if n == 1:
        log_f[1, 0] = 0.0
        return log_f

    last = terms.log_S_end.copy()
    log_f[n, :n] = last - logsumexp(last)
    for r in range(n - 1, 0, -1):
        nxt = log_f[r + 1]
        row = terms.log_S[r, :r] + np.logaddexp(
            nxt[:r] + terms.log_phi[r],
            nxt[r] + terms.log_mu[r, :r] + terms.log_nu[r],
        )
        invalid = np.isnan(row) | (row == np.inf)
        if invalid.any():
            bad = int(np.flatnonzero(invalid)[0])
            raise NumericalError(f"Non-finite backward message at ({r + 1}, {bad + 1})")
        norm = logsumexp(row)
        if not np.isfinite(norm):
            raise NumericalError(f"Backward messages vanish at event {r + 1}")
        log_f[r, :r] = row - norm
    return log_f


def smooth_q(state: FilterState, log_f: np.ndarray) -> np.ndarray:
    """q[r, j] ∝ f[r, j] p[r, j]."""
    n = state.n
    q = np.zeros((n, n))
    for r in range(1, n):
        w = state.log_p[r, :r] + log_f[r, :r]
        norm = logsumexp(w)
        if not np.isfinite(norm):
            raise NumericalError(f"Degenerate smoothed distribution at event {r + 1}")
        q[r, :r] = np.exp(w - norm)
    return q


def decluster_smoothed(state: FilterState, log_f: np.ndarray, q: np.ndarray) -> DeclusterResult:
    terms = state.terms
    n = terms.n
    omega_ij = np.zeros((n, n))
    omega = np.ones(n)
    pi = np.zeros((n, n))
    with np.errstate(under="ignore"):
        for r in range(1, n):
            nxt = log_f[r + 1]
            log_a = nxt[r] + terms.log_mu[r, :r] + terms.log_nu[r]
            log_b = nxt[:r] + terms.log_phi[r]
            log_ab = np.logaddexp(log_a, log_b)
            omega_ij[r, :r] = q[r, :r] * np.exp(log_a - log_ab)
            omega[r] = omega_ij[r, :r].sum()
            scale = np.sum(q[r, :r] * np.exp(nxt[:r] - log_ab))
            pi[r, :r] = np.exp(terms.log_psi[r, :r]) * scale
    return DeclusterResult(q=q, omega_ij=omega_ij, omega=omega, pi=pi,
                           mode=DeclusterMode.SMOOTHED, log_f=log_f)


def decluster_filtered(state: FilterState) -> DeclusterResult:
    """Probabilities given only the history up to and including each event."""
    terms = state.terms
    n = terms.n
    q = np.zeros((n, n))
    omega_ij = np.zeros((n, n))
    omega = np.ones(n)
    pi = np.zeros((n, n))
    with np.errstate(under="ignore"):
        for r in range(1, n):
            w = state.log_p[r, :r] + state.log_d[r, :r]
            w = np.exp(w - logsumexp(w))
            log_main = terms.log_mu[r, :r] + terms.log_nu[r]
            log_total = np.logaddexp(log_main, terms.log_phi[r])
            q[r, :r] = w
            omega_ij[r, :r] = w * np.exp(log_main - log_total)
            omega[r] = omega_ij[r, :r].sum()
            pi[r, :r] = np.exp(terms.log_psi[r, :r]) * np.sum(w * np.exp(-log_total))
    return DeclusterResult(q=q, omega_ij=omega_ij, omega=omega, pi=pi,
                           mode=DeclusterMode.FILTERED)


def decluster(catalog: Catalog, params: RetasParams, nu: BackgroundIntensity,
              mode: DeclusterMode = DeclusterMode.SMOOTHED,
              state: Optional[FilterState] = None) -> DeclusterResult:
    state = state or forward_filter(catalog, params, nu)
    mode = DeclusterMode(mode)
    if mode is DeclusterMode.FILTERED:
        result = decluster_filtered(state)
    else:
        log_f = backward_messages(state)
        result = decluster_smoothed(state, log_f, smooth_q(state, log_f))
    logger.debug(
        f"Declustered {catalog.n} events ({mode.value}): "
        f"{result.expected_mainshocks():.2f} expected main shocks"
    )
    return result


def brute_force_decluster(catalog: Catalog, params: RetasParams,
                          nu: BackgroundIntensity) -> DeclusterResult:
    """Posterior q, ω and π by summing over every branching structure."""
    n = catalog.n
    chunks = list(iter_branchings(catalog, params, nu, limit=BRUTE_FORCE_DECLUSTER_MAX_EVENTS))
    log_total = logsumexp(np.concatenate([c.log_density for c in chunks]))

    q = np.zeros((n, n))
    omega = np.zeros(n)
    pi = np.zeros((n, n))
    for chunk in chunks:
        w = np.exp(chunk.log_density - log_total)
        for r in range(n):
            main = chunk.parent[:, r] < 0
            omega[r] += w[main].sum()
            pi[r, :] += np.bincount(chunk.parent[~main, r], weights=w[~main], minlength=n)
            if r > 0:
                q[r, :] += np.bincount(chunk.last_main[:, r], weights=w, minlength=n)
    return DeclusterResult(q=q, omega_ij=np.zeros((n, n)), omega=omega, pi=pi,
                           mode=DeclusterMode.SMOOTHED)


def most_probable_labels(result: DeclusterResult) -> np.ndarray:
    """
    MAP label of every event: 0 for a main shock, else the 1-based parent number.

    Ties go to the main shock, then to the earliest parent.
    """
    n = result.n
    labels = np.zeros(n, dtype=int)
    for r in range(1, n):
        scores = np.concatenate([[result.omega[r]], result.pi[r, :r]])
        labels[r] = int(np.argmax(scores))
    return labels
