# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


import numpy as np
import pytest
from scipy import integrate, special, stats

from retas.core import kernels
from retas.core.catalog import catalog_from_arrays
from retas.helpers import DomainError, MagnitudeParams, RetasParams, SpatialWindow


def test_upper_incomplete_gamma_matches_scipy():
    for k in (0.5, 0.8, 2.0, 5.0):
        x = np.array([0.0, 0.1, 1.0, 5.0, 20.0])
        expected = special.gammaincc(k, x) * special.gamma(k)
        assert np.allclose(kernels.upper_incomplete_gamma(x, k), expected, rtol=1e-12)


def test_log_upper_incomplete_gamma_far_tail():
    # Γ(x, 2) = e^(-x)(x + 1)
    assert kernels.log_upper_incomplete_gamma(800.0, 2.0) == pytest.approx(-800.0 + np.log(801.0), rel=1e-12)
    # Γ(x, 1/2) = √π erfc(√x)
    expected = 0.5 * np.log(np.pi) + np.log(2.0) + special.log_ndtr(-np.sqrt(1800.0))
    assert kernels.log_upper_incomplete_gamma(900.0, 0.5) == pytest.approx(expected, rel=1e-10)


def test_log_upper_incomplete_gamma_domain():
    with pytest.raises(DomainError):
        kernels.log_upper_incomplete_gamma(1.0, 0.0)
    with pytest.raises(DomainError):
        kernels.log_upper_incomplete_gamma(-1.0, 1.0)


def test_exponential_renewal_has_constant_hazard():
    law = kernels.GammaRenewal(1.0, 2.0)
    assert np.allclose(law.hazard(np.array([0.01, 0.5, 3.0, 40.0])), 0.5, rtol=1e-10)
    assert law.cumulative_hazard(3.0) == pytest.approx(1.5, rel=1e-12)


def test_log_survival_matches_gamma_distribution():
    for kappa, beta in ((0.8, 1.25), (3.0, 0.5), (0.2, 5.0)):
        law = kernels.GammaRenewal(kappa, beta)
        u = np.array([1e-4, 0.3, 1.0, 4.0, 20.0, 60.0])
        assert np.allclose(law.log_survival(u), stats.gamma.logsf(u, kappa, scale=beta), rtol=1e-10)
        assert law.log_survival(0.0) == 0.0


def test_hazard_stays_finite_where_survival_underflows():
    law = kernels.GammaRenewal(0.8, 1.25)
    assert law.hazard(2000.0) == pytest.approx(0.8, rel=1e-3)
    H = law.cumulative_hazard(2000.0)
    assert np.isfinite(H) and H > 1590.0


def test_hazard_integral_matches_quadrature():
    for kappa, beta in ((0.8, 1.25), (3.0, 0.4)):
        params = RetasParams(kappa, beta, 1.2, 0.01, 0.01, 0.02, 0.5, 1.0)
        expected, _ = integrate.quad(lambda s: kernels.renewal_hazard(s, params), 0.2, 1.7)
        assert kernels.renewal_hazard_integral(0.2, 1.7, params) == pytest.approx(expected, rel=1e-8)
        assert kernels.renewal_hazard_integral(1.0, 1.0, params) == 0.0


def test_hazard_integral_rejects_reversed_limits(params):
    with pytest.raises(DomainError):
        kernels.renewal_hazard_integral(2.0, 1.0, params)


def test_gamma_renewal_moments():
    law = kernels.GammaRenewal(0.848, 27.25)
    assert law.mean() == pytest.approx(23.11, abs=0.05)
    assert law.sd() == pytest.approx(25.09, abs=0.05)


def test_omori_cdf_matches_quadrature(params):
    expected, _ = integrate.quad(lambda s: kernels.omori_density(s, params), 0.0, 5.0,
                                 points=[0.01, 0.1, 1.0], limit=200)
    assert kernels.omori_cdf(5.0, params) == pytest.approx(expected, rel=1e-7)


def test_omori_density_normalized():
    params = RetasParams(1.0, 1.0, 2.0, 0.1, 0.01, 0.01, 0.5, 1.0)
    total, _ = integrate.quad(lambda s: kernels.omori_density(s, params), 0.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-7)
    assert kernels.omori_cdf(0.0, params) == 0.0


def test_omori_domain(params):
    with pytest.raises(DomainError):
        kernels.omori_density(0.0, params)
    with pytest.raises(DomainError):
        kernels.omori_cdf(1.0, params.with_values(p=1.0))


def test_spatial_density_normalized(params):
    total, _ = integrate.dblquad(lambda y, x: kernels.spatial_density(x, y, params),
                                 -1.0, 1.0, -1.5, 1.5)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_spatial_mass_whole_window_and_rectangle(params):
    s1, s2 = np.sqrt(params.sigma1_sq), np.sqrt(params.sigma2_sq)
    wide = SpatialWindow.rectangle(1.0 - 10 * s1, 1.0 + 10 * s1, 2.0 - 10 * s2, 2.0 + 10 * s2)
    assert kernels.spatial_mass(1.0, 2.0, wide, params) == pytest.approx(1.0, abs=1e-10)
    assert kernels.spatial_mass(5.0, 5.0, SpatialWindow.whole_plane(), params) == 1.0

    window = SpatialWindow.rectangle(0.0, 0.3, -0.2, 0.2)
    expected, _ = integrate.dblquad(
        lambda y, x: kernels.spatial_density(x - 0.1, y + 0.05, params), 0.0, 0.3, -0.2, 0.2
    )
    assert kernels.spatial_mass(0.1, -0.05, window, params) == pytest.approx(expected, rel=1e-7)


def test_spatial_mass_far_outside_window(params):
    window = SpatialWindow.rectangle(0.0, 1.0, 0.0, 1.0)
    mass = kernels.spatial_mass(30.0, 0.5, window, params)
    assert 0.0 <= mass < 1e-100


def test_boost_values():
    params = RetasParams(1.0, 1.0, 1.2, 0.01, 0.01, 0.01, 0.264, 1.506)
    assert kernels.boost(6.0, params, 5.0) == pytest.approx(1.19, abs=0.005)
    assert kernels.boost(7.0, params, 5.0) == pytest.approx(5.35, abs=0.02)
    assert kernels.log_boost(6.0, params, 5.0) == pytest.approx(np.log(0.264) + 1.506)
    with pytest.raises(DomainError):
        kernels.boost(4.9, params, 5.0)


def test_magnitude_density_normalized():
    mag = MagnitudeParams(gamma=5.0, m0=2.0)
    total, _ = integrate.quad(lambda m: kernels.magnitude_density(m, mag), 2.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert mag.mean_excess == pytest.approx(0.2)


def test_magnitude_mle_closed_form():
    m = np.array([3.1, 3.2, 3.3, 3.4])
    catalog = catalog_from_arrays([1.0, 2.0, 3.0, 4.0], [0.0] * 4, [0.0] * 4, m, m0=3.0)
    mag = kernels.magnitude_mle(catalog)
    assert mag.gamma == pytest.approx(4.0)
    assert kernels.magnitude_loglik(catalog, mag) == pytest.approx(4 * np.log(4.0) - 4.0)


def test_productivity(params):
    result = kernels.productivity(params, 5.0)
    assert result.value == pytest.approx(0.625)
    assert not result.supercritical

    gamma = 1.0 / 0.336
    low = RetasParams(1.0, 1.0, 1.2, 0.01, 0.01, 0.01, 0.264, 1.506)
    high = RetasParams(1.0, 1.0, 1.2, 0.01, 0.01, 0.01, 0.563, 1.417)
    assert kernels.productivity(low, gamma).value == pytest.approx(0.534, abs=5e-4)
    result = kernels.productivity(high, gamma)
    assert result.value == pytest.approx(1.075, abs=5e-4)
    assert result.supercritical


def test_productivity_unbounded_when_gamma_below_alpha(params):
    result = kernels.productivity(params, 0.5)
    assert np.isinf(result.value) and result.supercritical
