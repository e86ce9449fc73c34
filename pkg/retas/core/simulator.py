# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import stats

from retas import config, logger
from retas.core import kernels
from retas.core.catalog import Catalog, catalog_from_arrays, save_catalog
from retas.helpers import (DomainError, MagnitudeParams, RetasParams, SpatialWindow,
                           SupercriticalError, utils)

# simulation design of the declustering study
STUDY_KAPPAS = (0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0)
STUDY_PARAMS = RetasParams(
    kappa=0.8, beta=1.25, p=1.2, c=0.01, sigma1_sq=0.01, sigma2_sq=0.02, A=0.5, alpha=1.0
)
STUDY_GAMMA = 5.0


@dataclass(frozen=True)
class SimConfig:
    params: RetasParams = STUDY_PARAMS
    mag: MagnitudeParams = field(default_factory=lambda: MagnitudeParams(gamma=STUDY_GAMMA, m0=0.0))
    bg_means: tuple = (0.0, 0.0)
    bg_vars: tuple = (0.05, 0.10)
    T: float = 250.0
    seed: int = 42
    window: SpatialWindow = field(default_factory=SpatialWindow.whole_plane)
    max_events: int = 1_000_000

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"Simulation horizon must be positive, got {self.T}")
        self.params.check()


@dataclass
class SimulatedCatalog:
    """A catalog with its true branching: labels[i] is 0 or the 1-based parent number."""

    catalog: Catalog
    labels: np.ndarray
    generation: np.ndarray

    @property
    def is_mainshock(self) -> np.ndarray:
        return self.labels == 0

    def labels_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "index": np.arange(1, self.catalog.n + 1),
            "parent": self.labels,
            "generation": self.generation,
        })


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Stream `replicate` of `seed`; the same stream SeedSequence(seed).spawn would hand out."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


def sample_omori_lags(rng: np.random.Generator, size: int, params: RetasParams) -> np.ndarray:
    """Inverse-CDF draws t = c((1 - U)^(1/(1-p)) - 1); zero lags are redrawn."""
    lags = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        u = rng.random(todo.size)
        lags[todo] = params.c * np.expm1(np.log1p(-u) / (1.0 - params.p))
        todo = todo[~(lags[todo] > 0)]
    return lags


def sample_magnitudes(rng: np.random.Generator, size: int, mag: MagnitudeParams) -> np.ndarray:
    return mag.m0 + rng.exponential(mag.mean_excess, size=size)


def _sample_background(rng, size: int, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    sx, sy = np.sqrt(cfg.bg_vars[0]), np.sqrt(cfg.bg_vars[1])
    x = np.empty(size)
    y = np.empty(size)
    todo = np.arange(size)
    # rejection keeps the background law renormalized to the window
    while todo.size:
        x[todo] = rng.normal(cfg.bg_means[0], sx, todo.size)
        y[todo] = rng.normal(cfg.bg_means[1], sy, todo.size)
        todo = todo[~cfg.window.contains(x[todo], y[todo])]
    return x, y


def simulate_catalog(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> SimulatedCatalog:
    """
    Simulate a RETAS catalog on [0, T] by its cluster representation.

    Main shocks come from a gamma renewal process started at 0; every event
    of any generation has Poisson(k(m)) direct offspring. Offspring after T
    or outside a bounded window are discarded and do not reproduce.
    """
    rng = rng or np.random.default_rng(cfg.seed)
    params, mag = cfg.params, cfg.mag
    prod = kernels.productivity(params, mag.gamma)
    if prod.supercritical:
        raise SupercriticalError(
            f"Productivity {prod.value:.4g} is not below 1 (A={params.A}, alpha={params.alpha}, "
            f"gamma={mag.gamma}); the cascade would not die out"
        )

    law = kernels.renewal_law(params)
    times = []
    clock = law.sample(rng)
    while clock <= cfg.T:
        times.append(clock)
        clock += law.sample(rng)
    n_main = len(times)
    t = np.asarray(times, dtype=float)
    x, y = _sample_background(rng, n_main, cfg)
    m = sample_magnitudes(rng, n_main, mag)

    all_t, all_x, all_y, all_m = [t], [x], [y], [m]
    parents = [np.full(n_main, -1)]
    gens = [np.zeros(n_main, dtype=int)]
    total = n_main
    offset = 0
    gen = 0
    batch = (t, x, y, m)
    while batch[0].size:
        bt, bx, by, bm = batch
        counts = rng.poisson(kernels.boost(bm, params, mag.m0))
        k = int(counts.sum())
        if total + k > cfg.max_events:
            raise SupercriticalError(
                f"Cascade exceeded {cfg.max_events} events (productivity {prod.value:.4g})"
            )
        src = np.repeat(np.arange(bt.size), counts)
        ct = bt[src] + sample_omori_lags(rng, k, params)
        cx = bx[src] + rng.normal(0.0, np.sqrt(params.sigma1_sq), k)
        cy = by[src] + rng.normal(0.0, np.sqrt(params.sigma2_sq), k)
        cm = sample_magnitudes(rng, k, mag)
        keep = (ct <= cfg.T) & cfg.window.contains(cx, cy)

        gen += 1
        all_t.append(ct[keep])
        all_x.append(cx[keep])
        all_y.append(cy[keep])
        all_m.append(cm[keep])
        parents.append(offset + src[keep])
        gens.append(np.full(int(keep.sum()), gen))
        offset += bt.size
        total += int(keep.sum())
        batch = (ct[keep], cx[keep], cy[keep], cm[keep])

    t = np.concatenate(all_t)
    parent = np.concatenate(parents)
    generation = np.concatenate(gens)
    order = np.argsort(t, kind="stable")
    position = np.empty_like(order)
    position[order] = np.arange(order.size)
    labels = np.where(parent[order] < 0, 0, position[np.maximum(parent[order], 0)] + 1)

    catalog = catalog_from_arrays(
        t[order], np.concatenate(all_x)[order], np.concatenate(all_y)[order],
        np.concatenate(all_m)[order], T=cfg.T, m0=mag.m0, window=cfg.window,
    )
    logger.debug(f"Simulated {catalog.n} events ({n_main} main shocks, {gen} generations).")
    return SimulatedCatalog(catalog=catalog, labels=labels.astype(int), generation=generation[order])


def simulate_batch(cfg: SimConfig, replicates: int, start: int = 0) -> Iterator[SimulatedCatalog]:
    """Replicate k is drawn from stream k of the configured seed."""
    for k in range(start, start + replicates):
        yield simulate_catalog(cfg, rng=replicate_rng(cfg.seed, k))


def write_simulation(sim: SimulatedCatalog, out_dir: str | Path, stem: str = "catalog") -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    catalog_path = save_catalog(sim.catalog, out_dir / f"{stem}.csv")
    labels_path = utils.write_csv(sim.labels_frame(), out_dir / f"{stem}_labels.csv")
    return catalog_path, labels_path


def study_config(kappa: float, T: float = 250.0, seed: Optional[int] = None) -> SimConfig:
    """Declustering-study design: β = 1/κ keeps the mean main-shock gap at one day."""
    params = STUDY_PARAMS.with_values(kappa=kappa, beta=1.0 / kappa)
    return SimConfig(params=params, T=T, seed=config.SEED if seed is None else seed)


class InverseCdfReport(NamedTuple):
    omori_ks: float
    omori_pvalue: float
    magnitude_ks: float
    magnitude_pvalue: float
    mean_excess: float


def inverse_cdf_checks(params: RetasParams = STUDY_PARAMS, gamma: float = STUDY_GAMMA,
                       size: int = 100_000, seed: int = 0) -> InverseCdfReport:
    """KS comparison of the Omori and magnitude samplers with their closed-form CDFs."""
    rng = np.random.default_rng(seed)
    mag = MagnitudeParams(gamma=gamma, m0=0.0)
    lags = sample_omori_lags(rng, size, params)
    omori = stats.kstest(lags, lambda v: kernels.omori_cdf(v, params))
    mags = sample_magnitudes(rng, size, mag)
    expo = stats.kstest(mags - mag.m0, stats.expon(scale=mag.mean_excess).cdf)
    return InverseCdfReport(
        float(omori.statistic), float(omori.pvalue),
        float(expo.statistic), float(expo.pvalue), float(np.mean(mags - mag.m0)),
    )
