# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import optimize, stats
from scipy.spatial import cKDTree

from retas import logger
from retas.core import kernels
from retas.core.catalog import Catalog
from retas.core.kde import WeightedKde, aicc, default_bandwidth, kde_dof
from retas.core.likelihood import (BackgroundIntensity, KdeBackground, PairTerms,
                                   forward_filter)
from retas.core.smoother import DeclusterMode, DeclusterResult, decluster
from retas.helpers import (PARAM_NAMES, BandwidthMatrix, DataError, DomainError,
                           MagnitudeParams, NumericalError, RetasError, RetasParams,
                           SpatialWindow, utils)

N_PARAMS = len(PARAM_NAMES)
MIN_FIT_EVENTS = 10


class Algorithm(str, Enum):
    NELDER_MEAD = "nelder-mead"
    QUASI_NEWTON = "quasi-newton"


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: Algorithm = Algorithm.NELDER_MEAD
    max_evals: int = 4000
    x_tol: float = 1e-6
    f_tol: float = 1e-8
    polish: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not (self.x_tol > 0 and self.f_tol > 0 and self.max_evals > 0):
            raise DomainError("Optimizer tolerances and evaluation budget must be positive")


@dataclass(frozen=True)
class FitConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    h: Optional[BandwidthMatrix] = None
    tol: float = 0.001
    max_iter: int = 50
    min_iter: int = 2
    extra_params: int = N_PARAMS
    fix_kappa: bool = False
    init: Optional[RetasParams] = None


@dataclass
class FitReport:
    params: RetasParams
    se: np.ndarray
    loglik: float
    mag: MagnitudeParams
    mag_loglik: float
    dof_kde: float
    aicc: float
    productivity: float
    pct_mainshocks: float
    iterations: int
    converged: bool
    zeta: Optional[float] = None
    h: Optional[BandwidthMatrix] = None
    cov: Optional[np.ndarray] = None
    trajectory: list = field(default_factory=list)
    fix_kappa: bool = False
    nu: Optional[BackgroundIntensity] = None
    declustered: Optional[DeclusterResult] = None

    @property
    def supercritical(self) -> bool:
        return not self.productivity < 1.0

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "se": dict(zip(PARAM_NAMES, self.se.tolist())),
            "loglik": self.loglik,
            "magnitude": {"gamma": self.mag.gamma, "m0": self.mag.m0, "loglik": self.mag_loglik},
            "dof_kde": self.dof_kde,
            "aicc": self.aicc,
            "productivity": self.productivity,
            "pct_mainshocks": self.pct_mainshocks,
            "iterations": self.iterations,
            "converged": self.converged,
            "zeta": self.zeta,
            "h": self.h.to_dict() if self.h else None,
            "trajectory": list(self.trajectory),
            "fix_kappa": self.fix_kappa,
            "waiting_time": waiting_time_summary(self.params, self.cov)._asdict(),
        }


class MleResult(NamedTuple):
    params: RetasParams
    loglik: float
    converged: bool
    evaluations: int


class _Objective:
    """Negative log-likelihood over the free coordinates of the unconstrained vector."""

    def __init__(self, catalog: Catalog, nu: BackgroundIntensity, base: RetasParams, fix_kappa: bool):
        self.catalog = catalog
        self.nu = nu
        self.log_nu = np.asarray(nu.log_evaluate(catalog.x, catalog.y), dtype=float)
        self.base = base.with_values(kappa=1.0) if fix_kappa else base
        self.free = np.arange(1 if fix_kappa else 0, N_PARAMS)
        self.calls = 0

    def start(self) -> np.ndarray:
        return self.base.to_unconstrained()[self.free]

    def params(self, z) -> RetasParams:
        full = self.base.to_unconstrained()
        full[self.free] = z
        return RetasParams.from_unconstrained(full)

    def loglik(self, params: RetasParams) -> float:
        terms = PairTerms.build(self.catalog, params, self.nu, log_nu=self.log_nu)
        return forward_filter(self.catalog, params, self.nu, terms=terms).loglik

    def __call__(self, z) -> float:
        self.calls += 1
        if not np.all(np.isfinite(z)):
            return np.inf
        try:
            with np.errstate(over="ignore", under="ignore"):
                return -self.loglik(self.params(z))
        except (DomainError, NumericalError, FloatingPointError):
            return np.inf


def mle_fixed_background(catalog: Catalog, nu: BackgroundIntensity, init: RetasParams,
                         cfg: Optional[OptimizerConfig] = None, fix_kappa: bool = False) -> MleResult:
    """
    Maximize the log-likelihood for a fixed background.

    Optimizes in the unconstrained space (log for positive parameters,
    log(p - 1) for p, alpha as is). Never returns a point worse than `init`.
    """
    cfg = cfg or OptimizerConfig()
    init.check()
    objective = _Objective(catalog, nu, init, fix_kappa)
    z0 = objective.start()
    f0 = objective(z0)
    if not np.isfinite(f0):
        raise NumericalError(f"Log-likelihood is not finite at the initial parameters {init}")

    if cfg.algorithm is Algorithm.NELDER_MEAD:
        res = optimize.minimize(
            objective, z0, method="Nelder-Mead",
            options={"maxfev": cfg.max_evals, "xatol": cfg.x_tol, "fatol": cfg.f_tol, "adaptive": True},
        )
    else:
        res = optimize.minimize(objective, z0, method="BFGS",
                                options={"maxiter": cfg.max_evals, "gtol": cfg.f_tol ** 0.5})
    best_z, best_f, converged = res.x, res.fun, bool(res.success)

    if cfg.polish and cfg.algorithm is Algorithm.NELDER_MEAD and np.isfinite(best_f):
        polished = optimize.minimize(objective, best_z, method="BFGS", options={"maxiter": 200})
        if np.isfinite(polished.fun) and polished.fun < best_f:
            best_z, best_f = polished.x, polished.fun

    if not best_f <= f0:
        best_z, best_f = z0, f0
    if not converged:
        logger.warning(f"Optimizer stopped without convergence after {objective.calls} evaluations.")
    return MleResult(objective.params(best_z), float(-best_f), converged, objective.calls)


def numerical_hessian(fun: Callable[[np.ndarray], float], x, steps=None) -> np.ndarray:
    """Central-difference Hessian, symmetrized; default steps max(1e-5|x_i|, 1e-7)."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = np.maximum(1e-5 * np.abs(x), 1e-7) if steps is None else np.asarray(steps, dtype=float)
    f0 = fun(x)
    hess = np.zeros((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / (h[i] * h[i])
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            hess[i, j] = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            hess[j, i] = hess[i, j]
    return 0.5 * (hess + hess.T)


def standard_errors(catalog: Catalog, nu: BackgroundIntensity, params_hat: RetasParams,
                    fix_kappa: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """
    Standard errors from the inverse observed information in the original parameters.

    Returns (se, cov). Unavailable entries are NaN; a fixed kappa gets 0.
    """
    log_nu = np.asarray(nu.log_evaluate(catalog.x, catalog.y), dtype=float)
    theta = params_hat.to_array()
    free = np.arange(1 if fix_kappa else 0, N_PARAMS)

    def neg_loglik(values):
        full = theta.copy()
        full[free] = values
        params = RetasParams.from_array(full)
        try:
            terms = PairTerms.build(catalog, params, nu, log_nu=log_nu)
            return -forward_filter(catalog, params, nu, terms=terms).loglik
        except (DomainError, NumericalError):
            return np.nan

    hess = numerical_hessian(neg_loglik, theta[free])
    se = np.full(N_PARAMS, np.nan)
    cov = np.full((N_PARAMS, N_PARAMS), np.nan)
    if fix_kappa:
        se[0] = 0.0
        cov[0, :] = cov[:, 0] = 0.0
    if not np.all(np.isfinite(hess)):
        logger.warning("Observed information is not finite; standard errors unavailable.")
        return se, cov
    try:
        inv = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        logger.warning("Observed information is singular; standard errors unavailable.")
        return se, cov

    cov[np.ix_(free, free)] = inv
    diag = np.diag(inv)
    ok = diag > 0
    se[free[ok]] = np.sqrt(diag[ok])
    if not ok.all():
        bad = ", ".join(PARAM_NAMES[i] for i in free[~ok])
        logger.warning(f"Observed information is not positive definite for: {bad}.")
    return se, cov


def _finish(catalog: Catalog, nu: BackgroundIntensity, params: RetasParams, loglik: float,
            declustered: DeclusterResult, fix_kappa: bool, dof: float, extra_params: int,
            **extra) -> FitReport:
    mag = kernels.magnitude_mle(catalog)
    se, cov = standard_errors(catalog, nu, params, fix_kappa=fix_kappa)
    k = extra_params - (1 if fix_kappa else 0) + dof
    prod = kernels.productivity(params, mag.gamma)
    if prod.supercritical:
        logger.warning(f"Fitted productivity {prod.value:.4g} is not subcritical.")
    try:
        score = aicc(loglik, k, catalog.n)
    except DomainError:
        score = math.nan
    return FitReport(
        params=params,
        se=se,
        loglik=loglik,
        mag=mag,
        mag_loglik=kernels.magnitude_loglik(catalog, mag),
        dof_kde=dof,
        aicc=score,
        productivity=prod.value,
        pct_mainshocks=100.0 * declustered.expected_mainshocks() / catalog.n,
        cov=cov,
        fix_kappa=fix_kappa,
        nu=nu,
        declustered=declustered,
        **extra,
    )


def fit_fixed_background(catalog: Catalog, nu: BackgroundIntensity, init: RetasParams,
                         cfg: Optional[FitConfig] = None) -> FitReport:
    """One MLE with ν known; the background carries no smoothing degrees of freedom."""
    cfg = cfg or FitConfig()
    mle = mle_fixed_background(catalog, nu, init, cfg.optimizer, fix_kappa=cfg.fix_kappa)
    declustered = decluster(catalog, mle.params, nu, DeclusterMode.SMOOTHED)
    return _finish(
        catalog, nu, mle.params, mle.loglik, declustered, cfg.fix_kappa, 0.0, cfg.extra_params,
        iterations=1, converged=mle.converged, trajectory=[mle.loglik],
    )


def semiparametric_fit(catalog: Catalog, zeta: float, cfg: Optional[FitConfig] = None) -> FitReport:
    """
    Alternate MLE for a fixed KDE background with background re-estimation.

    The background starts as an equal-weight KDE and is re-weighted by the
    smoothed main-shock probabilities until the log-likelihood changes by
    less than `cfg.tol` between iterations.
    """
    cfg = cfg or FitConfig()
    if catalog.n < MIN_FIT_EVENTS:
        raise DataError(f"Semiparametric fitting needs at least {MIN_FIT_EVENTS} events, got {catalog.n}")
    h = (cfg.h or default_bandwidth(catalog)).scaled(zeta)
    points = np.column_stack([catalog.x, catalog.y])
    kde = WeightedKde(points, np.ones(catalog.n), h)
    nu = KdeBackground(kde)
    params = cfg.init or telescoping_init(catalog)

    trajectory: list[float] = []
    converged = False
    declustered = None
    for iteration in range(1, cfg.max_iter + 1):
        mle = mle_fixed_background(catalog, nu, params, cfg.optimizer, fix_kappa=cfg.fix_kappa)
        params = mle.params
        declustered = decluster(catalog, params, nu, DeclusterMode.SMOOTHED)
        delta = mle.loglik - trajectory[-1] if trajectory else math.inf
        trajectory.append(mle.loglik)
        logger.info(
            f"zeta={zeta:g} iteration {iteration}: loglik={mle.loglik:.4f}, "
            f"delta={delta:.4g}, main shocks={declustered.expected_mainshocks():.1f}"
        )
        if iteration >= cfg.min_iter and abs(delta) < cfg.tol:
            converged = True
            break
        if iteration < cfg.max_iter:
            nu = KdeBackground(kde.with_weights(declustered.omega))

    if not converged:
        logger.warning(f"zeta={zeta:g}: no convergence after {cfg.max_iter} iterations.")
    dof = kde_dof(points, h)
    report = _finish(
        catalog, nu, params, trajectory[-1], declustered, cfg.fix_kappa, dof, cfg.extra_params,
        iterations=len(trajectory), converged=converged, zeta=zeta, h=h, trajectory=trajectory,
    )
    logger.info(f"zeta={zeta:g}: loglik={report.loglik:.4f}, DoF={dof:.2f}, AICc={report.aicc:.2f}")
    return report


@dataclass
class SmoothingSelection:
    best_zeta: Optional[float]
    reports: dict
    failed: dict

    def best(self) -> FitReport:
        return self.reports[self.best_zeta]


def _fit_one(args) -> tuple[float, Optional[FitReport], Optional[str]]:
    catalog, zeta, cfg = args
    try:
        return zeta, semiparametric_fit(catalog, zeta, cfg), None
    except RetasError as ex:
        return zeta, None, str(ex)


def select_smoothing(catalog: Catalog, zeta_grid, cfg: Optional[FitConfig] = None,
                     workers: int = 1) -> SmoothingSelection:
    """Fit every ζ and keep the one with the smallest AICc; failed fits are skipped."""
    grid = [float(z) for z in zeta_grid]
    if not grid:
        raise DomainError("The smoothing grid is empty")
    cfg = cfg or FitConfig()
    if cfg.init is None:
        cfg = replace(cfg, init=telescoping_init(catalog))
    jobs = [(catalog, zeta, cfg) for zeta in grid]
    started = time.time()
    outcomes = []
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(grid))) as pool:
            for outcome in pool.map(_fit_one, jobs):
                outcomes.append(outcome)
                logger.info(utils.progress(len(outcomes), len(grid), time.time() - started, "smoothing fits"))
    else:
        for job in jobs:
            outcomes.append(_fit_one(job))
            logger.info(utils.progress(len(outcomes), len(grid), time.time() - started, "smoothing fits"))

    reports, failed = {}, {}
    for zeta, report, error in outcomes:
        if report is None:
            logger.warning(f"zeta={zeta:g} failed: {error}")
            failed[zeta] = error
        else:
            reports[zeta] = report
    scored = {z: r.aicc for z, r in reports.items() if np.isfinite(r.aicc)}
    best = min(scored, key=lambda z: (scored[z], z)) if scored else None
    if best is None:
        logger.warning("No smoothing multiplier produced a usable fit.")
    else:
        logger.info(f"Selected zeta={best:g} (AICc={scored[best]:.2f}).")
    return SmoothingSelection(best, reports, failed)


def _temporal_etas_nll(z, t, m, m0, T):
    mu0, p, c, A, alpha = np.exp(z[0]), 1.0 + np.exp(z[1]), np.exp(z[2]), np.exp(z[3]), z[4]
    if not np.all(np.isfinite([mu0, p, c, A, alpha])):
        return np.inf
    lag = t[:, None] - t[None, :]
    past = lag > 0
    safe = np.where(past, lag, 1.0)
    boost = A * np.exp(alpha * (m - m0))
    g = np.where(past, (p - 1.0) / c * (1.0 + safe / c) ** (-p), 0.0)
    rate = mu0 + g @ boost
    comp = mu0 * T + np.sum(boost * -np.expm1((1.0 - p) * np.log1p((T - t) / c)))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = -(np.sum(np.log(rate)) - comp)
    return value if np.isfinite(value) else np.inf


def telescoping_init(catalog: Catalog, window: Optional[SpatialWindow] = None) -> RetasParams:
    """
    Starting values from nested sub-models.

    Gamma fit to the waiting times, then a purely temporal ETAS fit for
    the triggering parameters, then nearest-neighbour spreads for the
    spatial variances. A bounded `window` (default: the catalog's) caps
    each spread at the squared half-width of the region.
    """
    window = window or catalog.window
    t, x, y, m = catalog.t, catalog.x, catalog.y, catalog.m
    gaps = np.diff(np.concatenate([[0.0], t]))
    gaps = gaps[gaps > 0]
    kappa, beta = 1.0, float(catalog.T / max(catalog.n, 1))
    if gaps.size >= 2 and np.ptp(gaps) > 0:
        try:
            shape, _, scale = stats.gamma.fit(gaps, floc=0)
            if np.isfinite(shape) and np.isfinite(scale) and shape > 0 and scale > 0:
                kappa, beta = float(shape), float(scale)
        except (RuntimeError, ValueError, FloatingPointError) as ex:
            logger.debug(f"Gamma fit to waiting times failed: {ex}")

    z0 = np.array([np.log(0.5 * catalog.n / catalog.T), np.log(0.2), np.log(0.01), np.log(0.5), 1.0])
    with np.errstate(over="ignore", under="ignore"):
        res = optimize.minimize(
            _temporal_etas_nll, z0, args=(t, m, catalog.m0, catalog.T), method="Nelder-Mead",
            options={"maxfev": 2000, "xatol": 1e-4, "fatol": 1e-6},
        )
    z = res.x if np.isfinite(res.fun) else z0
    mu0 = float(np.exp(z[0]))
    p = float(np.clip(1.0 + np.exp(z[1]), 1.01, 3.0))
    c = float(np.clip(np.exp(z[2]), 1e-5, 1.0))
    A = float(np.clip(np.exp(z[3]), 1e-3, 0.95))
    alpha = float(np.clip(z[4], -3.0, 3.0))

    # main shocks are the background share of all events
    background = float(np.clip(mu0 * catalog.T / catalog.n, 0.05, 1.0))
    beta = beta / background

    pts = np.column_stack([x, y])
    var_x = var_y = 1.0
    if catalog.n >= 2:
        _, idx = cKDTree(pts).query(pts, k=2)
        off = pts - pts[idx[:, 1]]
        var_x = float(np.mean(off[:, 0] ** 2))
        var_y = float(np.mean(off[:, 1] ** 2))
    spread = max(float(np.var(x)), float(np.var(y)), 1e-6)
    var_x = var_x if var_x > 0 else 1e-3 * spread
    var_y = var_y if var_y > 0 else 1e-3 * spread
    if not window.is_whole_plane:
        var_x = min(var_x, ((window.x_max - window.x_min) / 2.0) ** 2)
        var_y = min(var_y, ((window.y_max - window.y_min) / 2.0) ** 2)

    init = RetasParams(
        kappa=float(np.clip(kappa, 0.05, 20.0)),
        beta=float(max(beta, 1e-6)),
        p=p, c=c, sigma1_sq=var_x, sigma2_sq=var_y, A=A, alpha=alpha,
    )
    init.check()
    logger.info(f"Telescoped initial values: {init}")
    return init


class WaitingTime(NamedTuple):
    mean: float
    sd: float
    se_mean: float
    se_sd: float


def waiting_time_summary(params: RetasParams, cov=None) -> WaitingTime:
    """Mean κβ and standard deviation β√κ of main-shock gaps, with delta-method SEs."""
    kappa, beta = params.kappa, params.beta
    mean = kappa * beta
    sd = beta * math.sqrt(kappa)
    if cov is None:
        return WaitingTime(mean, sd, math.nan, math.nan)
    block = np.asarray(cov, dtype=float)[:2, :2]
    grad_mean = np.array([beta, kappa])
    grad_sd = np.array([beta / (2.0 * math.sqrt(kappa)), math.sqrt(kappa)])
    var_mean = float(grad_mean @ block @ grad_mean)
    var_sd = float(grad_sd @ block @ grad_sd)
    return WaitingTime(mean, sd, _sqrt_or_nan(var_mean), _sqrt_or_nan(var_sd))


def _sqrt_or_nan(value: float) -> float:
    return math.sqrt(value) if value >= 0 else math.nan
