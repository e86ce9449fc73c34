# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import os
import tempfile
from pathlib import Path

os.environ.setdefault("RETAS_LOG_FILE", str(Path(tempfile.gettempdir()) / "retas-tests.log"))

import numpy as np
import pytest

from retas.core.catalog import catalog_from_arrays
from retas.core.likelihood import ParametricBackground
from retas.core.simulator import STUDY_PARAMS
from retas.helpers import RetasParams


def make_catalog(n: int, seed: int = 0, gap: float = 0.7, window=None, T=None):
    """A small random catalog with clustered-looking times around the origin."""
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.exponential(gap, n)) + 0.05
    x = rng.normal(0.0, 0.2, n)
    y = rng.normal(0.0, 0.3, n)
    m = rng.exponential(0.3, n)
    return catalog_from_arrays(t, x, y, m, T=t[-1] + 0.5 if T is None else T, m0=0.0, window=window)


@pytest.fixture
def params() -> RetasParams:
    return STUDY_PARAMS


@pytest.fixture
def wide_params() -> RetasParams:
    # broad triggering so that every branching structure carries weight
    return RetasParams(kappa=1.7, beta=0.6, p=1.4, c=0.05, sigma1_sq=0.05, sigma2_sq=0.08, A=0.8, alpha=0.7)


@pytest.fixture
def nu() -> ParametricBackground:
    return ParametricBackground(0.0, 0.0, 0.05, 0.10)


@pytest.fixture
def small_catalog():
    return make_catalog(6, seed=3)
