# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import numpy as np
import pandas as pd
import pytest
from scipy import integrate

from retas.core.catalog import catalog_from_arrays
from retas.core.estimation import FitConfig, OptimizerConfig
from retas.core.evaluation import (SUMMARY_ROWS, FitMode, StudyConfig, aggregate_estimates,
                                   branching_accuracy, cluster_report, mahalanobis_trim,
                                   roc_auc, run_replicate, run_study, summary_stats,
                                   truth_as_result)
from retas.core.simulator import STUDY_PARAMS, SimConfig, SimulatedCatalog, study_config
from retas.core.smoother import DeclusterMode, DeclusterResult
from retas.helpers import PARAM_NAMES, DataError

QUICK_FIT = FitConfig(optimizer=OptimizerConfig(max_evals=150, polish=False), max_iter=2)


def test_roc_auc_extremes():
    labels = np.array([True, True, False, False])
    assert roc_auc([0.9, 0.8, 0.2, 0.1], labels).auc == 1.0
    assert roc_auc([0.1, 0.2, 0.8, 0.9], labels).auc == 0.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], labels).auc == 0.5


def test_roc_curve_points():
    curve = roc_auc([0.9, 0.4, 0.6, 0.1], [True, True, False, False])
    assert curve.auc == pytest.approx(0.75)
    assert curve.fpr.tolist() == [0.0, 0.0, 0.5, 0.5, 1.0]
    assert curve.tpr.tolist() == [0.0, 0.5, 0.5, 1.0, 1.0]
    assert integrate.trapezoid(curve.tpr, curve.fpr) == pytest.approx(curve.auc)


def test_roc_auc_chance_level():
    rng = np.random.default_rng(0)
    scores = rng.random(10_000)
    labels = rng.random(10_000) < 0.4
    assert roc_auc(scores, labels).auc == pytest.approx(0.5, abs=0.02)


def test_roc_needs_both_classes():
    with pytest.raises(DataError):
        roc_auc([0.1, 0.2], [True, True])


def _truth(labels):
    labels = np.asarray(labels)
    n = labels.size
    t = np.arange(1, n + 1, dtype=float)
    catalog = catalog_from_arrays(t, np.zeros(n), np.zeros(n), np.linspace(0.0, 1.0, n), m0=0.0)
    return SimulatedCatalog(catalog=catalog, labels=labels, generation=np.zeros(n, dtype=int))


def test_truth_scores_perfectly():
    truth = _truth([0, 1, 0, 3, 2, 0])
    result = truth_as_result(truth)
    assert branching_accuracy(result, truth) == 1.0
    assert np.allclose(result.omega + result.pi.sum(axis=1), 1.0)


def test_branching_accuracy_counts_labels():
    truth = _truth([0, 1, 0, 3])
    n = 4
    pi = np.zeros((n, n))
    pi[1, 0] = 0.9
    pi[3, 0] = 0.6
    result = DeclusterResult(q=np.zeros((n, n)), omega_ij=np.zeros((n, n)),
                             omega=np.array([1.0, 0.1, 0.8, 0.4]), pi=pi, mode=DeclusterMode.SMOOTHED)
    assert branching_accuracy(result, truth) == pytest.approx(2.0 / 3.0)


def test_mahalanobis_trim_drops_outlier():
    rng = np.random.default_rng(1)
    truth = STUDY_PARAMS
    est = truth.to_array() + rng.normal(scale=0.05, size=(39, 8))
    est = np.vstack([est, truth.to_array() + 5.0])
    trim = mahalanobis_trim(est, truth, 0.05)
    assert trim.keep.sum() == 38
    assert not trim.keep[-1]
    assert not trim.diagonal_fallback


def test_mahalanobis_trim_falls_back_on_singular_covariance():
    rng = np.random.default_rng(2)
    est = STUDY_PARAMS.to_array() + rng.normal(scale=0.05, size=(20, 8))
    est[:, 3] = 0.01
    trim = mahalanobis_trim(est, STUDY_PARAMS, 0.1)
    assert trim.diagonal_fallback
    assert trim.keep.sum() == 18


def test_aggregate_estimates():
    truth = STUDY_PARAMS
    est = np.vstack([truth.to_array() + 0.1, truth.to_array() - 0.1, truth.to_array() + 0.3])
    se = np.full((3, 8), 0.1)
    frame = aggregate_estimates(est, se, truth)
    assert frame.index.tolist() == ["True", "Est", "SE", "SE_hat", "CP"]
    assert frame.columns.tolist() == list(PARAM_NAMES)
    assert np.allclose(frame.loc["Est"], truth.to_array() + 0.1)
    assert np.allclose(frame.loc["SE_hat"], 0.1)
    assert np.allclose(frame.loc["CP"], 2.0 / 3.0)
    kept = aggregate_estimates(est, se, truth, keep=np.array([True, True, False]))
    assert np.allclose(kept.loc["CP"], 1.0)


def test_summary_stats_layout():
    stats = summary_stats([1.0, 2.0, 3.0, 4.0, np.nan])
    assert stats.index.tolist() == list(SUMMARY_ROWS)
    assert stats["Min"] == 1.0 and stats["Max"] == 4.0
    assert stats["Mean"] == 2.5 and stats["Median"] == 2.5
    assert summary_stats([np.nan]).isna().all()


def test_cluster_report():
    truth = _truth([0, 1, 2, 0, 4, 1])
    frame = cluster_report(truth_as_result(truth), truth.catalog)
    assert frame["root"].tolist() == [1, 4]
    assert frame["size"].tolist() == [4, 2]
    assert frame["generations"].tolist() == [2, 1]
    assert isinstance(frame, pd.DataFrame)


def test_replicate_is_reproducible():
    cfg = StudyConfig(sim=SimConfig(T=15.0, seed=3), fit=QUICK_FIT, replicates=1,
                      decluster_modes=("smoothed", "filtered"))
    a = run_replicate(cfg, 0)
    b = run_replicate(cfg, 0)
    assert a.error is None
    assert np.array_equal(a.estimates, b.estimates)
    assert set(a.auc) == {"smoothed", "filtered"}


def test_small_study_writes_tables(tmp_path):
    cfg = StudyConfig(sim=SimConfig(T=15.0, seed=5), fit_mode=FitMode.KNOWN, fit=QUICK_FIT,
                      replicates=3, decluster_modes=("smoothed",), trim_frac=0.34)
    result = run_study(cfg, workers=1)
    assert result.estimates.shape[1] == 8
    assert result.estimates.shape[0] + result.failures == 3
    names = {p.name for p in result.write(tmp_path)}
    assert {"estimates.csv", "standard_errors.csv", "aggregate.csv", "auc.csv",
            "accuracy.csv", "auc_summary.csv"} <= names


def test_known_background_study_with_etas_comparison():
    cfg = StudyConfig(sim=SimConfig(T=15.0, seed=8), fit=QUICK_FIT, replicates=1,
                      decluster_modes=("etas",))
    outcome = run_replicate(cfg, 0)
    assert outcome.error is None
    assert 0.0 <= outcome.accuracy["etas"] <= 1.0


@pytest.mark.slow
def test_declustering_study_unit_shape():
    cfg = StudyConfig(sim=study_config(1.0, seed=42), replicates=100,
                      decluster_modes=("smoothed", "filtered", "etas"))
    result = run_study(cfg, workers=4)
    assert result.accuracy["smoothed"].mean() == pytest.approx(0.711, abs=0.03)
    assert result.auc["smoothed"].mean() >= result.auc["etas"].mean() - 0.01
