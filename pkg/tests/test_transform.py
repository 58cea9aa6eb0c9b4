from __future__ import annotations

import math

import numpy as np
import pytest

from cfsurv.errors import DomainError
from cfsurv.transform import yeo_johnson, yeo_johnson_deriv, yeo_johnson_inverse, yeo_johnson_log_deriv

THETAS = np.linspace(0.0, 2.0, 9)


@pytest.mark.parametrize(
    ("theta", "t", "expected"),
    [
        (1.0, -3.7, -3.7),
        (0.0, 1.0, math.log(2.0)),
        (0.5, 3.0, 2.0),
        (2.0, -1.0, -math.log(2.0)),
    ],
)
def test_known_values(theta: float, t: float, expected: float) -> None:
    assert yeo_johnson(theta, t) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_scalar_in_scalar_out_and_array_shape() -> None:
    assert isinstance(yeo_johnson(0.5, 3.0), float)
    values = yeo_johnson(0.5, np.array([[0.0, 1.0], [-1.0, 2.0]]))
    assert values.shape == (2, 2)


def test_derivative_values() -> None:
    assert yeo_johnson_deriv(1.0, 5.0) == pytest.approx(1.0)
    assert yeo_johnson_deriv(0.5, 3.0) == pytest.approx(0.5)
    assert yeo_johnson_log_deriv(0.5, 3.0) == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0, 1.7, 2.0])
def test_derivative_matches_central_difference(theta: float) -> None:
    t = np.array([-4.0, -0.7, 0.2, 1.5, 6.0])
    h = 1e-6
    numeric = (yeo_johnson(theta, t + h) - yeo_johnson(theta, t - h)) / (2 * h)
    np.testing.assert_allclose(yeo_johnson_deriv(theta, t), numeric, rtol=1e-6)


def test_inverse_round_trip() -> None:
    t = np.linspace(-20.0, 20.0, 81)
    for theta in THETAS:
        np.testing.assert_allclose(yeo_johnson_inverse(theta, yeo_johnson(theta, t)), t, atol=1e-10, rtol=1e-12)
    assert yeo_johnson_inverse(1.0, 4.2) == pytest.approx(4.2)
    assert yeo_johnson_inverse(0.5, 2.0) == pytest.approx(3.0)


def test_monotone_and_onto() -> None:
    t = np.linspace(-50.0, 50.0, 2001)
    for theta in THETAS:
        assert np.all(np.diff(yeo_johnson(theta, t)) > 0)
        # exponents below 1/2 and the log branches grow too slowly for the fixed bound
        if theta >= 0.5:
            assert yeo_johnson(theta, 1e6) > 1e3
        if 2.0 - theta >= 0.5:
            assert yeo_johnson(theta, -1e6) < -1e3
        assert yeo_johnson(theta, 1e12) > yeo_johnson(theta, 1e6) + 10.0
        assert yeo_johnson(theta, -1e12) < yeo_johnson(theta, -1e6) - 10.0


def test_point_symmetry() -> None:
    t = np.linspace(-5.0, 5.0, 41)
    for theta in THETAS:
        np.testing.assert_allclose(yeo_johnson(theta, t), -yeo_johnson(2.0 - theta, -t), atol=1e-12)


@pytest.mark.parametrize(("theta", "nearby"), [(0.0, 1e-8), (2.0, 2.0 - 1e-8)])
def test_continuity_at_branch_ends(theta: float, nearby: float) -> None:
    t = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    np.testing.assert_allclose(yeo_johnson(theta, t), yeo_johnson(nearby, t), atol=1e-6)


@pytest.mark.parametrize("theta", [-0.1, 2.1, float("nan")])
def test_theta_outside_range_rejected(theta: float) -> None:
    with pytest.raises(DomainError):
        yeo_johnson(theta, 1.0)


def test_non_finite_argument_rejected() -> None:
    with pytest.raises(DomainError):
        yeo_johnson(1.0, float("inf"))
    with pytest.raises(DomainError):
        yeo_johnson_inverse(1.0, float("nan"))
