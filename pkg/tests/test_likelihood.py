# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import numpy as np
import pytest
from scipy import integrate

from retas.core import kernels
from retas.core.catalog import Catalog, catalog_from_arrays
from retas.core.likelihood import (ConstantBackground, ParametricBackground, PairTerms,
                                   brute_force_loglik, etas_loglik, excitation,
                                   excitation_compensator, forward_filter)
from retas.helpers import DataError, DomainError, SpatialWindow
from tests.conftest import make_catalog


@pytest.mark.parametrize("n,seed", [(1, 0), (2, 1), (5, 2), (7, 4)])
def test_forward_filter_matches_enumeration(n, seed, wide_params, nu):
    catalog = make_catalog(n, seed=seed)
    state = forward_filter(catalog, wide_params, nu)
    assert state.loglik == pytest.approx(brute_force_loglik(catalog, wide_params, nu), rel=1e-9, abs=1e-9)


def test_forward_filter_matches_enumeration_in_window(wide_params):
    window = SpatialWindow.rectangle(-2.0, 2.0, -2.0, 2.0)
    catalog = make_catalog(6, seed=9, window=window)
    nu = ParametricBackground(0.1, -0.1, 0.05, 0.10, window=window)
    assert forward_filter(catalog, wide_params, nu).loglik == pytest.approx(
        brute_force_loglik(catalog, wide_params, nu), rel=1e-9, abs=1e-9
    )


def test_small_kappa_matches_enumeration(params, nu):
    catalog = make_catalog(6, seed=5)
    low = params.with_values(kappa=0.2, beta=5.0)
    assert forward_filter(catalog, low, nu).loglik == pytest.approx(
        brute_force_loglik(catalog, low, nu), rel=1e-9, abs=1e-9
    )


@pytest.mark.parametrize("seed", range(4))
def test_exponential_renewal_reduces_to_etas(seed, params, nu):
    catalog = make_catalog(40, seed=seed)
    poisson = params.with_values(kappa=1.0, beta=0.8)
    expected = etas_loglik(catalog, 1.0 / 0.8, poisson, nu)
    assert forward_filter(catalog, poisson, nu).loglik == pytest.approx(expected, rel=1e-10, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_filtered_rows_are_distributions(seed, params, nu):
    catalog = make_catalog(30, seed=seed)
    state = forward_filter(catalog, params, nu)
    p = state.p
    for r in range(1, catalog.n + 1):
        assert p[r, :r].sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((p[r, :r] >= 0) & (p[r, :r] <= 1))
        assert np.all(p[r, r:] == 0)


def test_loglik_has_no_magnitude_term(params, nu):
    catalog = make_catalog(10, seed=1)
    shifted = catalog_from_arrays(catalog.t, catalog.x, catalog.y, catalog.m + 1.0, T=catalog.T, m0=1.0)
    assert forward_filter(shifted, params, nu).loglik == pytest.approx(
        forward_filter(catalog, params, nu).loglik, rel=1e-12
    )


def test_first_event_at_origin_is_rejected(params, nu):
    catalog = Catalog(np.array([0.0, 1.0]), np.array([0.0, 0.1]), np.array([0.0, 0.1]),
                      np.array([0.5, 0.2]), T=2.0, m0=0.0)
    with pytest.raises(DomainError):
        forward_filter(catalog, params, nu)


def test_invalid_params_are_rejected(params, nu, small_catalog):
    with pytest.raises(DomainError):
        forward_filter(small_catalog, params.with_values(p=0.9), nu)


def test_enumeration_limit(params, nu):
    with pytest.raises(DataError):
        brute_force_loglik(make_catalog(11), params, nu)


def test_pair_terms_shapes(params, nu, small_catalog):
    terms = PairTerms.build(small_catalog, params, nu)
    n = small_catalog.n
    assert terms.log_S.shape == (n, n)
    assert terms.log_S_end.shape == (n,)
    assert np.all(np.isneginf(terms.log_psi[np.triu_indices(n)]))
    assert np.all(terms.log_S[np.tril_indices(n, -1)] <= 0)
    assert terms.log_phi[0] == -np.inf


def test_excitation_matches_kernels(params, small_catalog):
    t, x, y = small_catalog.T, 0.05, -0.1
    expected = sum(
        kernels.boost(e.m, params, small_catalog.m0)
        * kernels.omori_density(t - e.t, params)
        * kernels.spatial_density(x - e.x, y - e.y, params)
        for e in small_catalog
    )
    assert excitation(t, x, y, small_catalog, params) == pytest.approx(expected, rel=1e-12)
    assert excitation(small_catalog.t[0], x, y, small_catalog, params) == 0.0


def test_compensator_matches_quadrature(wide_params, small_catalog):
    T = small_catalog.T
    expected = 0.0
    for e in small_catalog:
        mass, _ = integrate.quad(lambda s: kernels.omori_density(s, wide_params), 0.0, T - e.t, limit=200)
        expected += kernels.boost(e.m, wide_params, small_catalog.m0) * mass
    assert excitation_compensator(T, small_catalog, wide_params) == pytest.approx(expected, rel=1e-7)


def test_parametric_background_renormalized_to_window():
    window = SpatialWindow.rectangle(-0.3, 0.4, -0.2, 0.5)
    nu = ParametricBackground(0.0, 0.0, 0.05, 0.10, window=window)
    total, _ = integrate.dblquad(lambda y, x: nu.evaluate(x, y), -0.3, 0.4, -0.2, 0.5)
    assert total == pytest.approx(1.0, rel=1e-7)
    assert nu.log_evaluate(0.1, 0.1) == pytest.approx(np.log(nu.evaluate(0.1, 0.1)))


def test_uniform_background():
    window = SpatialWindow.rectangle(0.0, 2.0, 0.0, 4.0)
    nu = ConstantBackground.uniform(window)
    assert nu.evaluate(np.zeros(3), np.ones(3)).tolist() == [0.125] * 3
    with pytest.raises(DomainError):
        ConstantBackground.uniform(SpatialWindow.whole_plane())
