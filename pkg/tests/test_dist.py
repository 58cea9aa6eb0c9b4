from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from cfsurv.dist import (
    bvn_cdf,
    bvn_tail,
    check_corr,
    check_cov,
    mvn_tail,
    norm_cdf,
    norm_logsf,
    norm_quantile,
    norm_sf,
    partial_corr,
)
from cfsurv.errors import DomainError, UnsupportedDimensionError


def test_univariate_kernels() -> None:
    assert norm_cdf(0.0) == pytest.approx(0.5)
    assert norm_sf(1.959963984540054) == pytest.approx(0.025, rel=1e-10)
    assert norm_quantile(0.975) == pytest.approx(1.959963984540054, rel=1e-12)
    # far tail stays representable on the log scale
    assert norm_logsf(40.0) == pytest.approx(stats.norm.logsf(40.0), rel=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, float("nan")])
def test_quantile_outside_unit_interval(p: float) -> None:
    with pytest.raises(DomainError):
        norm_quantile(p)


@pytest.mark.parametrize("rho", [-0.9, -0.5, 0.0, 0.5, 0.75, 0.95])
def test_orthant_at_origin(rho: float) -> None:
    expected = 0.25 + math.asin(rho) / (2.0 * math.pi)
    assert bvn_tail(0.0, 0.0, rho) == pytest.approx(expected, abs=1e-12)


def test_independent_case_factorises() -> None:
    a = np.array([-1.2, 0.3, 2.0])
    b = np.array([0.5, -0.4, 1.1])
    np.testing.assert_allclose(bvn_tail(a, b, 0.0), norm_sf(a) * norm_sf(b), atol=1e-14)


@pytest.mark.parametrize("rho", [-0.95, -0.6, 0.2, 0.6, 0.95])
def test_cdf_matches_scipy(rho: float) -> None:
    law = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, rho], [rho, 1.0]])
    for a, b in [(-1.0, 0.5), (0.3, 0.3), (1.5, -0.7), (-2.0, -2.5)]:
        assert bvn_cdf(a, b, rho) == pytest.approx(law.cdf([a, b]), abs=5e-5)


def test_cdf_and_tail_are_consistent() -> None:
    a, b, rho = 0.4, -0.8, 0.35
    lhs = bvn_cdf(a, b, rho)
    rhs = 1.0 - norm_sf(a) - norm_sf(b) + bvn_tail(a, b, rho)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_infinite_limits() -> None:
    assert bvn_tail(-np.inf, 0.7, 0.4) == pytest.approx(float(norm_sf(0.7)))
    assert bvn_tail(np.inf, 0.7, 0.4) == 0.0
    assert bvn_tail(-np.inf, -np.inf, -0.4) == 1.0


def test_broadcasting() -> None:
    a = np.zeros((3, 4))
    out = bvn_tail(a, np.linspace(-1, 1, 4), 0.3)
    assert out.shape == (3, 4)
    np.testing.assert_allclose(out[0], out[2])


@pytest.mark.parametrize("rho", [1.0, -1.0, 1.5, float("nan")])
def test_correlation_outside_open_interval(rho: float) -> None:
    with pytest.raises(DomainError):
        check_corr(rho)
    with pytest.raises(DomainError):
        bvn_tail(0.0, 0.0, rho)


def test_partial_correlation() -> None:
    assert partial_corr(0.5, 0.5, 0.5) == pytest.approx(1.0 / 3.0)
    assert partial_corr(0.0, 0.0, 0.4) == pytest.approx(0.4)
    with pytest.raises(DomainError):
        partial_corr(0.9, -0.9, 0.9)


def test_trivariate_equicorrelated_orthant() -> None:
    cov = np.full((3, 3), 0.5) + 0.5 * np.eye(3)
    # 1/8 + 3 asin(rho) / (4 pi) at rho = 0.5
    assert mvn_tail(np.zeros(3), cov) == pytest.approx(0.25, abs=1e-7)


def test_trivariate_identity_factorises() -> None:
    lower = np.array([[0.2, -0.5, 1.0], [-1.0, 0.0, 0.3]])
    expected = np.prod(norm_sf(lower), axis=1)
    np.testing.assert_allclose(mvn_tail(lower, np.eye(3)), expected, atol=1e-9)


def test_trivariate_matches_scipy() -> None:
    cov = np.array([[1.0, 0.3, 0.5], [0.3, 1.44, 0.48], [0.5, 0.48, 1.0]])
    lower = np.array([0.1, -0.4, 0.6])
    # P(eps > lower) = P(-eps < -lower)
    expected = stats.multivariate_normal(mean=np.zeros(3), cov=cov).cdf(-lower)
    assert mvn_tail(lower, cov) == pytest.approx(expected, abs=1e-4)


def test_lower_dimensions_and_limits() -> None:
    assert mvn_tail([0.5], [[4.0]]) == pytest.approx(float(norm_sf(0.25)))
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    sd = np.sqrt(np.diag(cov))
    rho = 0.6 / (sd[0] * sd[1])
    assert mvn_tail([1.0, -0.5], cov) == pytest.approx(bvn_tail(1.0 / sd[0], -0.5 / sd[1], rho))


def test_unsupported_dimension() -> None:
    with pytest.raises(UnsupportedDimensionError):
        mvn_tail(np.zeros(4), np.eye(4))
    with pytest.raises(DomainError):
        check_cov([[1.0, 2.0], [2.0, 1.0]])
