from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from cfsurv.errors import DomainError
from cfsurv.rng import bivariate_normal, bivariate_t, derive_seed, skew_normal, skew_normal_delta, stream


def test_streams_are_reproducible_and_distinct() -> None:
    a = stream(42, 3).standard_normal(5)
    b = stream(42, 3).standard_normal(5)
    c = stream(42, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert derive_seed(42, 1) == derive_seed(42, 1)
    assert derive_seed(42, 1) != derive_seed(42, 2)


def test_negative_seed_rejected() -> None:
    with pytest.raises(DomainError):
        stream(-1)


def test_bivariate_normal_covariance() -> None:
    cov = np.array([[1.0, 0.75], [0.75, 2.0]])
    draws = bivariate_normal(stream(1), cov, 200_000)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


def test_skew_normal_moments() -> None:
    cov = np.array([[1.0, 0.75], [0.75, 1.0]])
    draws = skew_normal(stream(2), cov, 200_000, skewness=0.92)
    np.testing.assert_allclose(draws.mean(axis=0), 0.0, atol=0.01)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)
    np.testing.assert_allclose(stats.skew(draws, axis=0), 0.92, atol=0.05)


def test_skew_normal_shape_bounds() -> None:
    assert skew_normal_delta(0.0) == 0.0
    assert 0.98 < skew_normal_delta(0.92) < 1.0
    with pytest.raises(DomainError):
        skew_normal_delta(1.2)


def test_strongly_negative_correlation_unattainable_with_skewed_margins() -> None:
    cov = np.array([[1.0, -0.5], [-0.5, 1.0]])
    with pytest.raises(DomainError):
        skew_normal(stream(0), cov, 10, skewness=0.92)


def test_bivariate_t_dependence() -> None:
    cov = np.array([[1.0, 0.6], [0.6, 1.0]])
    draws = bivariate_t(stream(3), cov, 5000, df=3.0)
    tau, _ = stats.kendalltau(draws[:, 0], draws[:, 1])
    # elliptical laws share tau = 2 asin(rho) / pi
    assert tau == pytest.approx(2.0 * math.asin(0.6) / math.pi, abs=0.04)
    assert np.median(draws[:, 0]) == pytest.approx(0.0, abs=0.05)


def test_bivariate_t_needs_finite_variance() -> None:
    with pytest.raises(DomainError):
        bivariate_t(stream(0), np.eye(2), 10, df=2.0)
