from __future__ import annotations

import math

import numpy as np
import pytest

from abel.errors import DomainError
from abel.stats import ar1_simulate, chi2_cdf, chi2_quantile, chi2_sf, make_rng


def series_chi2_cdf(df, x, terms=400):
    """Lower incomplete gamma by its power series."""
    k, h = df / 2.0, x / 2.0
    term = 1.0 / k
    total = term
    for m in range(1, terms):
        term *= h / (k + m)
        total += term
    return math.exp(k * math.log(h) - h - math.lgamma(k)) * total


def bisect_quantile(df, p):
    lo, hi = 0.0, 200.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if series_chi2_cdf(df, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_cdf_examples():
    for df in (1, 2, 5):
        assert chi2_cdf(df, 0.0) == 0.0
    for x in (0.1, 1.0, 7.3, 30.0):
        assert chi2_cdf(2, x) == pytest.approx(1 - math.exp(-x / 2), abs=1e-14)
    assert chi2_cdf(1, 6.635) == pytest.approx(0.99, abs=1e-4)
    assert chi2_cdf(3, math.inf) == 1.0
    for df, x in ((1, 0.5), (3, 4.0), (7, 12.0)):
        assert chi2_cdf(df, x) == pytest.approx(series_chi2_cdf(df, x), abs=1e-12)
        assert chi2_sf(df, x) == pytest.approx(1 - series_chi2_cdf(df, x), abs=1e-12)


def test_quantile_examples():
    assert chi2_quantile(1, 0.99) == pytest.approx(6.635, abs=5e-4)
    assert chi2_quantile(2, 1 - math.exp(-1)) == pytest.approx(2.0, abs=1e-12)
    oracle = bisect_quantile(3, 0.95)
    assert oracle == pytest.approx(7.8147, abs=1e-3)
    assert chi2_quantile(3, 0.95) == pytest.approx(oracle, abs=1e-9)
    for df in (1, 2, 3, 10):
        for p in (0.01, 0.5, 0.9, 0.95, 0.99):
            assert abs(chi2_cdf(df, chi2_quantile(df, p)) - p) <= 1e-10


def test_domain_errors():
    with pytest.raises(DomainError):
        chi2_cdf(1, -1.0)
    with pytest.raises(DomainError):
        chi2_quantile(1, 1.0)
    with pytest.raises(DomainError):
        chi2_quantile(0, 0.5)
    with pytest.raises(DomainError):
        ar1_simulate(10, 1, 1.0, make_rng(0))
    with pytest.raises(DomainError):
        make_rng(-1)


def test_streams_are_reproducible_and_distinct():
    a = make_rng(3, 0).standard_normal(5)
    assert np.array_equal(a, make_rng(3, 0).standard_normal(5))
    assert not np.array_equal(a, make_rng(3, 1).standard_normal(5))
    assert not np.array_equal(a, make_rng(4, 0).standard_normal(5))
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_ar1_zero_is_white_noise():
    x = ar1_simulate(4000, 2, 0.0, make_rng(1))
    assert np.array_equal(x, make_rng(1).standard_normal((4000, 2)))


@pytest.mark.parametrize("rho", [-0.5, 0.2, 0.8])
def test_ar1_moments(rho):
    n = 5000
    x = ar1_simulate(n, 1, rho, make_rng(2, int(10 * (rho + 1))))[:, 0]
    r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
    # Bartlett standard error of the lag-1 autocorrelation
    assert abs(r1 - rho) < 3 * math.sqrt((1 - rho**2) / n)
    var = 1 / (1 - rho**2)
    # long-run variance of the sample variance for a Gaussian AR(1)
    se_var = var * math.sqrt(2 * (1 + rho**2) / ((1 - rho**2) * n))
    assert abs(x.var() - var) < 3 * se_var


def test_ar1_vector_rho():
    x = ar1_simulate(3000, 2, [0.0, 0.9], make_rng(5))
    assert x[:, 1].var() > 3 * x[:, 0].var()
