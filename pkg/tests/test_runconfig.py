# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import json

import pytest

from retas.core.estimation import Algorithm
from retas.core.evaluation import FitMode, StudyDecluster
from retas.core.runconfig import RunConfig, load_run_config
from retas.core.simulator import STUDY_PARAMS
from retas.helpers import ConfigError

TRUE = {"kappa": 0.8, "beta": 1.25, "p": 1.2, "c": 0.01,
        "sigma1_sq": 0.01, "sigma2_sq": 0.02, "A": 0.5, "alpha": 1.0}


def test_defaults():
    run = RunConfig.from_dict({})
    assert run.fit_config().optimizer.algorithm is Algorithm.NELDER_MEAD
    assert run.fit_config().extra_params == 8
    assert run.sim_config(7).params == STUDY_PARAMS
    assert run.sim_config(7).seed == 7
    assert run.study_config(0).fit_mode is FitMode.KNOWN
    assert run.bandwidth() is None
    assert run.init_params() is None


def test_unknown_nested_key_is_named():
    with pytest.raises(ConfigError, match=r"fit\.bogus"):
        RunConfig.from_dict({"fit": {"bogus": 1}})


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": {}})


def test_params_missing_keys():
    partial = dict(TRUE)
    del partial["alpha"]
    with pytest.raises(ConfigError, match="model.params.*alpha"):
        RunConfig.from_dict({"model": {"params": partial}})


def test_params_out_of_domain():
    with pytest.raises(ConfigError, match="model.init"):
        RunConfig.from_dict({"model": {"init": {**TRUE, "p": 0.9}}})


def test_params_round_trip():
    run = RunConfig.from_dict({"model": {"params": TRUE, "fix_kappa": True}})
    assert run.true_params() == STUDY_PARAMS
    assert run.fit_config().fix_kappa
    assert not run.fit_config(fix_kappa=False).fix_kappa


def test_bandwidth_section():
    run = RunConfig.from_dict({"kde": {"h": {"h11": 0.02, "h12": 0.0, "h22": 0.03}}})
    assert run.bandwidth().h22 == 0.03
    with pytest.raises(ConfigError, match="kde.h"):
        RunConfig.from_dict({"kde": {"h": {"h11": 0.02, "h12": 0.5, "h22": 0.03}}})


def test_bad_background_and_zeta():
    with pytest.raises(ConfigError, match="fit.background"):
        RunConfig.from_dict({"fit": {"background": "flat"}})
    with pytest.raises(ConfigError, match="zeta"):
        RunConfig.from_dict({"kde": {"zeta": [1.0, -2.0]}})


def test_study_section():
    run = RunConfig.from_dict({"study": {"fit_mode": "semiparametric",
                                         "decluster_modes": ["filtered", "etas"]}})
    study = run.study_config(3)
    assert study.fit_mode is FitMode.SEMIPARAMETRIC
    assert study.decluster_modes == (StudyDecluster.FILTERED, StudyDecluster.ETAS)
    with pytest.raises(ConfigError, match="study"):
        RunConfig.from_dict({"study": {"fit_mode": "guess"}})


def test_simulation_window():
    run = RunConfig.from_dict({"simulation": {"window": {"kind": "rectangle", "x_min": -1, "x_max": 1,
                                                        "y_min": -1, "y_max": 1}}})
    assert not run.sim_config(0).window.is_whole_plane
    with pytest.raises(ConfigError, match="simulation.window"):
        RunConfig.from_dict({"simulation": {"window": {"kind": "rectangle", "x_min": 1}}})


def test_catalog_origin():
    run = RunConfig.from_dict({"catalog": {"origin": "1990-01-01T00:00:00", "m0": 3.0}})
    kwargs = run.catalog_kwargs()
    assert kwargs["origin"].year == 1990
    assert kwargs["m0"] == 3.0
    with pytest.raises(ConfigError, match="catalog.origin"):
        RunConfig.from_dict({"catalog": {"origin": "yesterday"}}).catalog_kwargs()


def test_load_run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 11, "optimizer": {"max_evals": 50}}))
    run = load_run_config(path)
    assert run.seed == 11
    assert run.optimizer_config().max_evals == 50
    assert load_run_config(None).seed is None


def test_load_run_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(bad)
    with pytest.raises(ConfigError, match="Cannot read"):
        load_run_config(tmp_path / "missing.json")
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_run_config(listed)
