# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import linalg, stats

from retas import logger
from retas.core.catalog import Catalog
from retas.core.estimation import (FitConfig, FitReport, fit_fixed_background,
                                   select_smoothing, semiparametric_fit)
from retas.core.likelihood import ParametricBackground
from retas.core.simulator import SimConfig, SimulatedCatalog, replicate_rng, simulate_catalog
from retas.core.smoother import (DeclusterMode, DeclusterResult, decluster,
                                 most_probable_labels)
from retas.helpers import PARAM_NAMES, DataError, DomainError, RetasError, RetasParams, utils

CP_Z = 1.96
SUMMARY_ROWS = ("Min", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max")


class RocCurve(NamedTuple):
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """ROC by a threshold sweep; AUC is the Mann-Whitney statistic with ties counted 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise DataError("Scores and labels differ in length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both main shocks and aftershocks")

    ranks = stats.rankdata(scores)
    auc = (ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    thresholds = np.unique(scores)[::-1]
    tpr = np.array([np.sum(labels & (scores >= thr)) for thr in thresholds]) / n_pos
    fpr = np.array([np.sum(~labels & (scores >= thr)) for thr in thresholds]) / n_neg
    return RocCurve(
        np.concatenate([[0.0], fpr]),
        np.concatenate([[0.0], tpr]),
        np.concatenate([[np.inf], thresholds]),
        float(auc),
    )


def branching_accuracy(result: DeclusterResult, truth: SimulatedCatalog) -> float:
    """Share of events 2..n whose MAP label equals the true label."""
    if result.n != truth.catalog.n:
        raise DataError(f"Decluster result has {result.n} events, truth has {truth.catalog.n}")
    if result.n < 2:
        return float("nan")
    labels = most_probable_labels(result)
    return float(np.mean(labels[1:] == truth.labels[1:]))


def truth_as_result(truth: SimulatedCatalog) -> DeclusterResult:
    """One-hot probabilities of the true branching structure."""
    n = truth.catalog.n
    omega = truth.is_mainshock.astype(float)
    omega[0] = 1.0
    pi = np.zeros((n, n))
    kids = np.flatnonzero(truth.labels > 0)
    pi[kids, truth.labels[kids] - 1] = 1.0
    return DeclusterResult(q=np.zeros((n, n)), omega_ij=np.zeros((n, n)), omega=omega, pi=pi,
                           mode=DeclusterMode.SMOOTHED)


class TrimResult(NamedTuple):
    keep: np.ndarray
    distances: np.ndarray
    diagonal_fallback: bool


def mahalanobis_trim(estimates, truth: RetasParams, frac: float = 0.05) -> TrimResult:
    """Drop the `frac` share of estimates farthest from the truth in Mahalanobis distance."""
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 2 or est.shape[0] == 0:
        raise DataError("Trimming needs a nonempty matrix of estimates")
    if not 0 <= frac < 1:
        raise DomainError(f"Trim fraction must lie in [0, 1), got {frac}")
    dev = est - truth.to_array()[: est.shape[1]]
    fallback = False
    cov = np.cov(est, rowvar=False) if est.shape[0] > 1 else np.eye(est.shape[1])
    cov = np.atleast_2d(cov)
    try:
        if np.linalg.cond(cov) > 1e12:
            raise linalg.LinAlgError("ill-conditioned")
        prec = linalg.inv(cov)
    except (linalg.LinAlgError, ValueError):
        fallback = True
        var = np.diag(cov).copy()
        var[~(var > 0)] = 1.0
        prec = np.diag(1.0 / var)
        logger.warning("Estimate covariance is singular; trimming with per-coordinate scaling.")
    dist = np.sqrt(np.einsum("ij,jk,ik->i", dev, prec, dev))
    drop = int(np.floor(frac * est.shape[0] + 1e-9))
    keep = np.ones(est.shape[0], dtype=bool)
    if drop:
        keep[np.argsort(dist, kind="stable")[::-1][:drop]] = False
    return TrimResult(keep, dist, fallback)


def aggregate_estimates(estimates, ses, truth: RetasParams, keep=None) -> pd.DataFrame:
    """Est, SE, estimated SE and coverage rows, one column per parameter."""
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(ses, dtype=float)
    if keep is not None:
        est, se = est[keep], se[keep]
    true = truth.to_array()
    ddof = 1 if est.shape[0] > 1 else 0
    with np.errstate(invalid="ignore"):
        covered = np.abs(est - true) <= CP_Z * se
        usable = np.isfinite(se)
        cp = np.where(usable.sum(axis=0) > 0,
                      (covered & usable).sum(axis=0) / np.maximum(usable.sum(axis=0), 1), np.nan)
    frame = pd.DataFrame(
        [true, est.mean(axis=0), est.std(axis=0, ddof=ddof), np.nanmean(se, axis=0), cp],
        index=["True", "Est", "SE", "SE_hat", "CP"],
        columns=list(PARAM_NAMES),
    )
    return frame


def summary_stats(values) -> pd.Series:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return pd.Series(np.nan, index=list(SUMMARY_ROWS))
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return pd.Series([q[0], q[1], q[2], v.mean(), q[3], q[4]], index=list(SUMMARY_ROWS))


class FitMode(str, Enum):
    KNOWN = "known"
    SEMIPARAMETRIC = "semiparametric"
    AICC = "aicc"


class StudyDecluster(str, Enum):
    SMOOTHED = "smoothed"
    FILTERED = "filtered"
    ETAS = "etas"


@dataclass(frozen=True)
class StudyConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    fit_mode: FitMode = FitMode.KNOWN
    zeta: float = 1.5
    zeta_grid: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    decluster_modes: tuple = ()
    replicates: int = 100
    trim_frac: float = 0.05
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        object.__setattr__(self, "fit_mode", FitMode(self.fit_mode))
        object.__setattr__(self, "decluster_modes", tuple(StudyDecluster(m) for m in self.decluster_modes))
        if self.replicates < 1:
            raise DomainError("A study needs at least one replicate")


@dataclass
class ReplicateOutcome:
    index: int
    n: int = 0
    estimates: Optional[np.ndarray] = None
    se: Optional[np.ndarray] = None
    zeta: Optional[float] = None
    dof: float = 0.0
    auc: dict = field(default_factory=dict)
    accuracy: dict = field(default_factory=dict)
    roc: dict = field(default_factory=dict)
    error: Optional[str] = None


def _fit(catalog: Catalog, cfg: StudyConfig, fit_cfg: FitConfig) -> FitReport:
    if cfg.fit_mode is FitMode.KNOWN:
        sim = cfg.sim
        nu = ParametricBackground(sim.bg_means[0], sim.bg_means[1], sim.bg_vars[0], sim.bg_vars[1],
                                  window=sim.window)
        init = fit_cfg.init or sim.params
        return fit_fixed_background(catalog, nu, init, fit_cfg)
    if cfg.fit_mode is FitMode.SEMIPARAMETRIC:
        return semiparametric_fit(catalog, cfg.zeta, fit_cfg)
    selection = select_smoothing(catalog, cfg.zeta_grid, fit_cfg)
    if selection.best_zeta is None:
        raise RetasError("No smoothing multiplier produced a usable fit")
    return selection.best()


def _score(outcome: ReplicateOutcome, name: str, result: DeclusterResult, sim: SimulatedCatalog) -> None:
    outcome.accuracy[name] = branching_accuracy(result, sim)
    try:
        curve = roc_auc(result.omega[1:], sim.is_mainshock[1:])
    except DataError:
        outcome.auc[name] = float("nan")
        return
    outcome.auc[name] = curve.auc
    outcome.roc[name] = (curve.fpr, curve.tpr)


def run_replicate(cfg: StudyConfig, k: int) -> ReplicateOutcome:
    outcome = ReplicateOutcome(index=k)
    try:
        sim = simulate_catalog(cfg.sim, rng=replicate_rng(cfg.sim.seed, k))
        outcome.n = sim.catalog.n
        fit_cfg = cfg.fit if cfg.fit.init is not None else replace(cfg.fit, init=cfg.sim.params)
        report = _fit(sim.catalog, cfg, fit_cfg)
        outcome.estimates = report.params.to_array()
        outcome.se = report.se
        outcome.zeta = report.zeta
        outcome.dof = report.dof_kde

        for mode in cfg.decluster_modes:
            if mode is StudyDecluster.SMOOTHED:
                result = report.declustered
            elif mode is StudyDecluster.FILTERED:
                result = decluster(sim.catalog, report.params, report.nu, DeclusterMode.FILTERED)
            else:
                etas_cfg = replace(fit_cfg, fix_kappa=True)
                result = _fit(sim.catalog, cfg, etas_cfg).declustered
            _score(outcome, mode.value, result, sim)
    except RetasError as ex:
        outcome.error = f"{type(ex).__name__}: {ex}"
        logger.warning(f"Replicate {k} failed: {outcome.error}")
    return outcome


def _run_replicate_job(args) -> ReplicateOutcome:
    cfg, k = args
    return run_replicate(cfg, k)


@dataclass
class StudyResult:
    config: StudyConfig
    outcomes: list
    estimates: pd.DataFrame
    se: pd.DataFrame
    trim: Optional[TrimResult]
    aggregate: pd.DataFrame
    aggregate_trimmed: Optional[pd.DataFrame]
    auc: pd.DataFrame
    accuracy: pd.DataFrame

    @property
    def failures(self) -> int:
        return sum(1 for o in self.outcomes if o.error)

    def auc_summary(self) -> pd.DataFrame:
        return pd.DataFrame({mode: summary_stats(self.auc[mode]) for mode in self.auc.columns})

    def accuracy_summary(self) -> pd.DataFrame:
        return pd.DataFrame({mode: summary_stats(self.accuracy[mode]) for mode in self.accuracy.columns})

    def write(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        written = [
            utils.write_csv(self.estimates.reset_index(), out_dir / "estimates.csv"),
            utils.write_csv(self.se.reset_index(), out_dir / "standard_errors.csv"),
            utils.write_csv(self.aggregate.reset_index(names="row"), out_dir / "aggregate.csv"),
        ]
        if self.aggregate_trimmed is not None:
            written.append(utils.write_csv(self.aggregate_trimmed.reset_index(names="row"),
                                           out_dir / "aggregate_trimmed.csv"))
        if len(self.auc.columns):
            written.append(utils.write_csv(self.auc.reset_index(), out_dir / "auc.csv"))
            written.append(utils.write_csv(self.accuracy.reset_index(), out_dir / "accuracy.csv"))
            written.append(utils.write_csv(self.auc_summary().reset_index(names="stat"),
                                           out_dir / "auc_summary.csv"))
            written.append(utils.write_csv(self.accuracy_summary().reset_index(names="stat"),
                                           out_dir / "accuracy_summary.csv"))
            rows = []
            for o in self.outcomes:
                for mode, (fpr, tpr) in o.roc.items():
                    rows.append(pd.DataFrame({"replicate": o.index, "mode": mode, "fpr": fpr, "tpr": tpr}))
            if rows:
                written.append(utils.write_csv(pd.concat(rows, ignore_index=True), out_dir / "roc_points.csv"))
        return written


def run_study(cfg: StudyConfig, workers: int = 1) -> StudyResult:
    """
    Simulate, fit and decluster `cfg.replicates` catalogs.

    Replicate k always uses random stream k, so results do not depend on
    the number of workers.
    """
    started = time.time()
    jobs = [(cfg, k) for k in range(cfg.replicates)]
    if workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = []
            for done, outcome in enumerate(pool.map(_run_replicate_job, jobs), start=1):
                outcomes.append(outcome)
                logger.info(utils.progress(done, cfg.replicates, time.time() - started))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_replicate_job(job))
            logger.info(utils.progress(job[1] + 1, cfg.replicates, time.time() - started))

    ok = [o for o in outcomes if o.error is None]
    if not ok:
        raise RetasError(f"All {cfg.replicates} replicates failed")
    index = pd.Index([o.index for o in ok], name="replicate")
    est = pd.DataFrame(np.vstack([o.estimates for o in ok]), index=index, columns=list(PARAM_NAMES))
    se = pd.DataFrame(np.vstack([o.se for o in ok]), index=index, columns=list(PARAM_NAMES))
    truth = cfg.sim.params

    trim = None
    trimmed = None
    if cfg.trim_frac > 0 and len(ok) > 1:
        trim = mahalanobis_trim(est.to_numpy(), truth, cfg.trim_frac)
        trimmed = aggregate_estimates(est.to_numpy(), se.to_numpy(), truth, keep=trim.keep)
    aggregate = aggregate_estimates(est.to_numpy(), se.to_numpy(), truth)

    modes = [m.value for m in cfg.decluster_modes]
    auc = pd.DataFrame([[o.auc.get(m, np.nan) for m in modes] for o in ok], index=index, columns=modes)
    acc = pd.DataFrame([[o.accuracy.get(m, np.nan) for m in modes] for o in ok], index=index, columns=modes)

    failures = len(outcomes) - len(ok)
    logger.info(
        f"Study finished: {len(ok)} replicates, {failures} failed, "
        f"{utils.format_duration(time.time() - started)}."
    )
    return StudyResult(cfg, outcomes, est, se, trim, aggregate, trimmed, auc, acc)


def cluster_report(result: DeclusterResult, catalog: Catalog) -> pd.DataFrame:
    """MAP clusters sorted by size: root event, size and number of generations below the root."""
    labels = most_probable_labels(result)
    n = labels.size
    root = np.arange(n)
    depth = np.zeros(n, dtype=int)
    for r in range(n):
        if labels[r] > 0:
            parent = labels[r] - 1
            root[r] = root[parent]
            depth[r] = depth[parent] + 1
    roots = np.flatnonzero(labels == 0)
    size = np.bincount(root, minlength=n)
    generations = np.zeros(n, dtype=int)
    np.maximum.at(generations, root, depth)
    frame = pd.DataFrame({
        "root": roots + 1,
        "time": catalog.t[roots],
        "magnitude": catalog.m[roots],
        "size": size[roots],
        "generations": generations[roots],
    })
    return frame.sort_values(["size", "root"], ascending=[False, True], ignore_index=True)
