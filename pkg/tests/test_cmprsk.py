from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate, stats

from cfsurv.cmprsk import (
    ADMIN,
    CmprskDataset,
    CmprskParams,
    CmprskRecord,
    cif,
    cif_curve,
    cmprsk_contributions,
    cmprsk_loglik,
    conditional_params,
    fit_cmprsk,
    nonparametric_cif,
)
from cfsurv.errors import DomainError, ValidationError
from cfsurv.estimator import FitConfig
from cfsurv.firststage import FirstStageSpec
from cfsurv.likelihood import contributions
from cfsurv.simkit import DgpSpec, default_cmprsk_truth, default_truth, generate


def _bivariate_as_cmprsk(eta) -> CmprskParams:
    cov = np.array(
        [
            [eta.sigma_t**2, eta.rho * eta.sigma_t * eta.sigma_c],
            [eta.rho * eta.sigma_t * eta.sigma_c, eta.sigma_c**2],
        ]
    )
    return CmprskParams(
        k=2,
        beta=np.vstack([eta.beta_t, eta.beta_c]),
        alpha=[eta.alpha_t, eta.alpha_c],
        lam=[eta.lambda_t, eta.lambda_c],
        theta=[eta.theta1, eta.theta2],
        sigma=cov,
    )


def _independent_pair(theta=(1.0, 1.0)) -> CmprskParams:
    return CmprskParams(
        k=2,
        beta=[[0.5], [1.0]],
        alpha=[0.0, 0.0],
        lam=[0.0, 0.0],
        theta=list(theta),
        sigma=np.diag([1.0, 1.5**2]),
    )


def test_parameter_validation() -> None:
    truth = default_cmprsk_truth()
    assert truth.r == 3 and truth.k == 2 and truth.n_coef == 2
    np.testing.assert_allclose(truth.sd, [1.0, 1.2, 1.0])
    assert truth.corr[0, 2] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        CmprskParams(k=1, beta=[[0.0], [0.0]], alpha=[0, 0], lam=[0, 0], theta=[1, 1], sigma=np.eye(2))
    with pytest.raises(DomainError):
        CmprskParams(k=2, beta=np.zeros((4, 1)), alpha=np.zeros(4), lam=np.zeros(4), theta=np.ones(4),
                     sigma=np.eye(4))
    with pytest.raises(DomainError):
        CmprskParams(k=2, beta=[[0.0], [0.0]], alpha=[0, 0], lam=[0, 0], theta=[1, 2.5], sigma=np.eye(2))
    with pytest.raises(DomainError):
        CmprskParams(k=2, beta=[[0.0], [0.0]], alpha=[0], lam=[0, 0], theta=[1, 1], sigma=np.eye(2))


def test_vector_layout() -> None:
    truth = default_cmprsk_truth()
    vec = truth.to_vector()
    names = CmprskParams.names(3, ("intercept", "x1"))
    assert vec.size == len(names) == len(CmprskParams.kinds(3, 2)) == 21
    assert names[:4] == ["beta1[intercept]", "beta1[x1]", "alpha1", "lambda1"]
    assert names[12:18] == ["sigma1", "sigma2", "sigma3", "rho12", "rho13", "rho23"]
    back = CmprskParams.from_vector(vec, 3, 2, 2)
    np.testing.assert_allclose(back.sigma, truth.sigma)
    np.testing.assert_allclose(back.beta, truth.beta)
    with pytest.raises(DomainError):
        CmprskParams.from_vector(vec[:-1], 3, 2, 2)


def test_two_latent_times_reduce_to_the_bivariate_model(baseline_data) -> None:
    eta = default_truth()
    v = baseline_data.true_control()
    expected = contributions(eta, baseline_data.y, baseline_data.delta, baseline_data.xi, baseline_data.x,
                             baseline_data.z, v)
    cmp_data = CmprskDataset.from_dataset(baseline_data.with_control(v))
    got = cmprsk_contributions(_bivariate_as_cmprsk(eta), cmp_data)
    np.testing.assert_allclose(got, expected, rtol=1e-8, atol=1e-10)


def test_conditional_params_closed_form() -> None:
    eta = default_truth()
    params = _bivariate_as_cmprsk(eta)
    x = np.array([[1.0, 1.0]])
    cond = conditional_params(params, 1, 2.0, x, [1.0], [0.3])
    tau_t = x[0] @ eta.beta_t + eta.alpha_t + 0.3 * eta.lambda_t
    tau_c = x[0] @ eta.beta_c + eta.alpha_c + 0.3 * eta.lambda_c
    u = (2.0 - tau_t) / eta.sigma_t
    assert cond.others == (2,)
    assert cond.mean[0, 0] == pytest.approx(tau_c + eta.rho * eta.sigma_c * u)
    assert cond.sd[0] == pytest.approx(eta.sigma_c * math.sqrt(1.0 - eta.rho**2))
    with pytest.raises(DomainError):
        conditional_params(params, 3, 2.0, x, [1.0], [0.3])


def test_cif_under_independence_matches_direct_integral() -> None:
    params = _independent_pair()
    t = 1.2

    def integrand(s: float) -> float:
        return stats.norm.pdf(s, 0.5, 1.0) * stats.norm.sf(s, 1.0, 1.5)

    expected, _ = integrate.quad(integrand, -np.inf, t)
    assert cif(params, 1, t, [1.0], 0.0, 0.0) == pytest.approx(expected, abs=1e-6)


def test_cifs_of_all_risks_sum_to_one() -> None:
    params = CmprskParams(
        k=3,
        beta=[[0.2], [0.5], [0.4]],
        alpha=[0.3, -0.2, 0.1],
        lam=[0.5, 0.1, -0.3],
        theta=[1.0, 0.8, 1.2],
        sigma=np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.1], [0.2, 0.1, 1.0]]),
    )
    total = sum(cif(params, j, np.inf, [1.0], 1.0, 0.2) for j in (1, 2, 3))
    assert total == pytest.approx(1.0, abs=1e-4)


def test_cif_curve_properties() -> None:
    truth = default_cmprsk_truth()
    grid = np.array([4.0, -np.inf, 1.0, 2.5, 6.0, np.inf])
    curve = cif_curve(truth, 1, grid, [1.0, 0.0], 1.0, 0.0)
    assert curve[1] == 0.0
    ordered = curve[np.argsort(grid)]
    assert np.all(np.diff(ordered) >= 0.0)
    assert curve[-1] < 1.0
    with pytest.raises(DomainError):
        cif_curve(truth, 3, grid, [1.0, 0.0], 1.0, 0.0)
    with pytest.raises(DomainError):
        cif_curve(truth, 1, [np.nan], [1.0, 0.0], 1.0, 0.0)


def test_cif_is_invariant_to_relabelling() -> None:
    params = CmprskParams(
        k=2,
        beta=[[0.5], [1.0]],
        alpha=[0.2, -0.1],
        lam=[0.4, 0.0],
        theta=[1.0, 0.7],
        sigma=np.array([[1.0, 0.4], [0.4, 1.3]]),
    )
    swapped = params.permuted([1, 0])
    times = [0.0, 1.0, 2.0]
    np.testing.assert_allclose(
        cif_curve(swapped, 2, times, [1.0], 1.0, 0.0),
        cif_curve(params, 1, times, [1.0], 1.0, 0.0),
        atol=1e-7,
    )


def test_aalen_johansen_hand_computed() -> None:
    np_cif = nonparametric_cif([1.0, 2.0, 3.0, 4.0], [1, 2, ADMIN, 1])
    assert np_cif.causes == (1, 2)
    np.testing.assert_allclose(np_cif.evaluate(1, [0.5, 1.0, 3.5, 4.0]), [0.0, 0.25, 0.25, 0.75])
    np.testing.assert_allclose(np_cif.evaluate(2, [4.0]), [0.25])
    with pytest.raises(DomainError):
        nonparametric_cif([], [])
    with pytest.raises(DomainError):
        nonparametric_cif([1.0], [-1])


def test_aalen_johansen_without_censoring_is_empirical() -> None:
    rng = np.random.default_rng(3)
    t = rng.exponential(size=200)
    labels = rng.integers(1, 3, size=200)
    np_cif = nonparametric_cif(t, labels)
    for cause in (1, 2):
        expected = np.mean((t <= 0.7) & (labels == cause))
        assert float(np_cif.evaluate(cause, 0.7)) == pytest.approx(expected)


def _product_limit_cif(t: np.ndarray, labels: np.ndarray, cause: int, at: float) -> float:
    """Aalen-Johansen value at ``at`` from the all-cause product-limit recursion."""

    surv, total = 1.0, 0.0
    for time in np.unique(t[t <= at]):
        at_risk = np.sum(t >= time)
        here = t == time
        total += surv * np.sum(here & (labels == cause)) / at_risk
        surv *= 1.0 - np.sum(here & (labels > 0)) / at_risk
    return total


def test_aalen_johansen_matches_product_limit_recursion() -> None:
    rng = np.random.default_rng(14)
    t = np.round(rng.exponential(size=300), 1)
    labels = rng.choice([0, 1, 2, 3], size=300, p=[0.3, 0.3, 0.3, 0.1])
    np_cif = nonparametric_cif(t, labels)
    assert np_cif.causes == (1, 2, 3)
    for cause in (1, 2, 3):
        for at in (0.2, 0.7, 1.5, 4.0):
            assert float(np_cif.evaluate(cause, at)) == pytest.approx(_product_limit_cif(t, labels, cause, at))


def test_aalen_johansen_with_only_censored_records() -> None:
    np_cif = nonparametric_cif([1.0, 2.0, 2.0], [0, 0, 0])
    assert np_cif.causes == ()
    np.testing.assert_allclose(np_cif.times, [1.0, 2.0])


def test_records_and_frames(cmprsk_data) -> None:
    counts = cmprsk_data.counts()
    assert sum(counts.values()) == cmprsk_data.n
    assert all(counts[j] > 0 for j in (1, 2, 3))
    i = int(np.flatnonzero(cmprsk_data.cause == 2)[0])
    rec = cmprsk_data.record(i)
    assert rec.delta_star == (0, 1, 0, 0)
    assert rec.cause == 2
    assert CmprskRecord(y=1.0, delta_star=(0, 0, 0, 1), x=np.ones(1), w_tilde=0.0, z=0.0).cause == ADMIN
    with pytest.raises(ValidationError):
        CmprskRecord(y=1.0, delta_star=(1, 1, 0), x=np.ones(1), w_tilde=0.0, z=0.0)

    frame = cmprsk_data.to_frame(include_truth=True)
    back = CmprskDataset.from_frame(frame, r=3, covariates=("x1",))
    np.testing.assert_array_equal(back.cause, cmprsk_data.cause)
    np.testing.assert_allclose(back.x, cmprsk_data.x)
    np.testing.assert_allclose(back.truth["v"], cmprsk_data.truth["v"])
    with pytest.raises(ValidationError):
        CmprskDataset.from_frame(frame.drop(columns="cause"), r=3, covariates=("x1",))
    with pytest.raises(ValidationError):
        CmprskDataset(y=[1.0], cause=[4], x=np.ones((1, 1)), w_tilde=[0.0], z=[0.0], r=3)


def test_loglik_is_finite_at_the_truth(cmprsk_data) -> None:
    work = cmprsk_data.with_control(cmprsk_data.truth["v"].to_numpy())
    value = cmprsk_loglik(default_cmprsk_truth(), work)
    assert math.isfinite(value)
    with pytest.raises(ValidationError):
        cmprsk_contributions(default_cmprsk_truth(), cmprsk_data)


def test_fit_rejects_bad_inputs(cmprsk_data) -> None:
    with pytest.raises(ValidationError):
        fit_cmprsk(cmprsk_data, FirstStageSpec(), FitConfig(), k=2, theta_fixed=(1.0, 1.0))
    with pytest.raises(ValidationError):
        fit_cmprsk(cmprsk_data, FirstStageSpec(), FitConfig(theta_fixed=(1.0, 1.0)), k=2)
    with pytest.raises(ValidationError):
        fit_cmprsk(cmprsk_data, FirstStageSpec(), FitConfig(min_events=10_000), k=2)


@pytest.mark.slow
def test_fit_recovers_the_competing_risks_truth() -> None:
    data = generate(DgpSpec(scenario="cmprsk-r3", n=1500, seed=8))
    result = fit_cmprsk(data, FirstStageSpec(), FitConfig(compute_vcov=False, n_starts=1), k=2)
    assert result.converged
    est = dict(zip(result.names, result.estimates))
    assert abs(est["alpha1"] - 1.5) < 1.0
    assert abs(est["lambda3"] + 2.2) < 1.0
    assert abs(est["rho13"] - 0.5) < 0.35
    assert abs(est["theta3"] - 0.5) < 0.35
    assert result.to_dict()["k"] == 2
    frame = pd.DataFrame({"cif": cif_curve(result.params_hat, 1, [1.0, 3.0], [1.0, 0.0], 1.0, 0.0)})
    assert frame["cif"].is_monotonic_increasing
