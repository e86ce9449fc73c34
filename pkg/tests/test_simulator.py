# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import replace

import numpy as np
import pytest

from retas.core.catalog import load_catalog
from retas.core.kernels import boost, omori_cdf, productivity
from retas.core.simulator import (STUDY_GAMMA, STUDY_KAPPAS, STUDY_PARAMS, SimConfig,
                                  inverse_cdf_checks, replicate_rng, sample_omori_lags,
                                  simulate_batch, simulate_catalog, study_config, write_simulation)
from retas.helpers import DomainError, SpatialWindow, SupercriticalError


def test_same_seed_same_catalog():
    cfg = SimConfig(T=40.0, seed=7)
    a = simulate_catalog(cfg)
    b = simulate_catalog(cfg)
    assert np.array_equal(a.catalog.t, b.catalog.t)
    assert np.array_equal(a.labels, b.labels)


def test_replicate_streams():
    cfg = SimConfig(T=30.0, seed=11)
    first, second = list(simulate_batch(cfg, 2))
    assert first.catalog.n != second.catalog.n or not np.array_equal(first.catalog.t, second.catalog.t)
    again = simulate_catalog(cfg, rng=replicate_rng(11, 1))
    assert np.array_equal(again.catalog.t, second.catalog.t)
    shifted = next(simulate_batch(cfg, 1, start=1))
    assert np.array_equal(shifted.catalog.t, second.catalog.t)


def test_labels_point_to_earlier_events():
    sim = simulate_catalog(SimConfig(T=60.0, seed=3))
    catalog, labels = sim.catalog, sim.labels
    assert labels[0] == 0
    kids = np.flatnonzero(labels > 0)
    assert kids.size > 0
    assert np.all(labels[kids] <= kids)
    assert np.all(catalog.t[labels[kids] - 1] < catalog.t[kids])
    assert np.all(sim.generation[labels == 0] == 0)
    assert np.all(sim.generation[kids] == sim.generation[labels[kids] - 1] + 1)
    assert np.all(catalog.t <= 60.0) and np.all(catalog.m >= 0.0)


def test_bounded_window_keeps_events_inside():
    window = SpatialWindow.rectangle(-0.3, 0.3, -0.3, 0.3)
    sim = simulate_catalog(SimConfig(T=40.0, seed=5, window=window))
    assert np.all(window.contains(sim.catalog.x, sim.catalog.y))
    assert sim.catalog.window == window


def test_supercritical_model_is_refused():
    hot = STUDY_PARAMS.with_values(A=3.0)
    cfg = SimConfig(params=hot, T=50.0, seed=1, max_events=2000)
    assert productivity(hot, STUDY_GAMMA).supercritical
    with pytest.raises(SupercriticalError):
        simulate_catalog(cfg)


def test_infinite_productivity_is_refused():
    cfg = SimConfig(params=STUDY_PARAMS.with_values(alpha=6.0), T=5.0, seed=1)
    with pytest.raises(SupercriticalError, match="inf"):
        simulate_catalog(cfg)


def test_invalid_horizon():
    with pytest.raises(DomainError):
        SimConfig(T=0.0)


def test_omori_lags_are_positive():
    lags = sample_omori_lags(np.random.default_rng(0), 10_000, STUDY_PARAMS)
    assert np.all(lags > 0)


def test_inverse_cdf_samplers():
    report = inverse_cdf_checks(size=100_000, seed=4)
    assert report.omori_pvalue > 1e-3
    assert report.magnitude_pvalue > 1e-3
    assert report.mean_excess == pytest.approx(0.2, abs=0.005)


def test_study_design():
    assert STUDY_KAPPAS == (0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0)
    for kappa in STUDY_KAPPAS:
        cfg = study_config(kappa, seed=0)
        assert cfg.params.kappa * cfg.params.beta == pytest.approx(1.0)
        assert cfg.T == 250.0


def test_write_simulation(tmp_path):
    sim = simulate_catalog(SimConfig(T=20.0, seed=2))
    catalog_path, labels_path = write_simulation(sim, tmp_path, "run")
    loaded = load_catalog(catalog_path)
    assert loaded.n == sim.catalog.n
    assert np.array_equal(loaded.t, sim.catalog.t)
    assert labels_path.read_text().splitlines()[0] == "index,parent,generation"


@pytest.mark.slow
def test_offspring_counts_match_productivity():
    cfg = SimConfig(T=250.0, seed=21)
    children = 0
    expected = 0.0
    boosts = []
    for sim in simulate_batch(cfg, 200):
        catalog = sim.catalog
        k = boost(catalog.m, cfg.params, catalog.m0)
        boosts.append(k)
        children += int(np.sum(sim.labels > 0))
        # offspring falling after T are never recorded
        expected += float(np.sum(k * omori_cdf(cfg.T - catalog.t, cfg.params)))
    assert np.mean(np.concatenate(boosts)) == pytest.approx(0.625, abs=0.02)
    assert children / expected == pytest.approx(1.0, abs=0.03)


@pytest.mark.slow
def test_main_shock_rate_matches_renewal_mean():
    params = STUDY_PARAMS.with_values(kappa=2.0, beta=0.5)
    cfg = replace(SimConfig(T=250.0, seed=22), params=params)
    counts = [int(np.sum(sim.is_mainshock)) for sim in simulate_batch(cfg, 200)]
    assert np.mean(counts) == pytest.approx(cfg.T / (params.kappa * params.beta), rel=0.02)
