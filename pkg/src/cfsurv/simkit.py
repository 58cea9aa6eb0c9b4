"""Simulation designs and Monte-Carlo replication metrics.

Scenarios:

* ``baseline``: binary Z from a logistic first stage, binary instrument,
  bivariate normal errors.
* ``link-probit`` / ``link-cloglog``: the first-stage error is normal or
  minimum-Gumbel (uniform instrument) while fits keep the logit link.
* ``skew-normal`` / ``student-t3`` / ``heteroscedastic``: continuous
  ``Z = W'gamma + nu`` with ``nu ~ N(0, 2)`` and misspecified errors.
* ``cmprsk-r3``: two competing risks plus one dependent censoring time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special

from .cmprsk import ADMIN, CmprskDataset, CmprskParams, cif_curve, fit_cmprsk, nonparametric_cif
from .data import Dataset
from .errors import CfsurvError, DomainError, ValidationError
from .estimator import FitConfig, FitVariant, fit
from .firststage import FirstStageKind, FirstStageSpec, control_value, logistic_control, probit_control
from .gof import bootstrap_gof
from .likelihood import EtaParams
from .parallel import run_tasks
from .rng import bivariate_normal, bivariate_t, derive_seed, gumbel, logistic, multivariate_normal, normal, \
    skew_normal, stream, uniform
from .transform import yeo_johnson_inverse

LOGGER = logging.getLogger(__name__)

DEFAULT_GAMMA = (-1.0, 0.6, 2.3)
DEFAULT_ADMIN_MAX = 8.0
DEFAULT_ADMIN_SHARE = 0.20
DEFAULT_SHARES = (0.40, 0.40, 0.20)
# largest C-intercept move tried by calibrate_shares
CALIBRATION_SHIFT = 4.0


class Scenario(str, Enum):
    BASELINE = "baseline"
    LINK_PROBIT = "link-probit"
    LINK_CLOGLOG = "link-cloglog"
    SKEW_NORMAL = "skew-normal"
    STUDENT_T3 = "student-t3"
    HETEROSCEDASTIC = "heteroscedastic"
    CMPRSK_R3 = "cmprsk-r3"

    @property
    def continuous_z(self) -> bool:
        return self in (Scenario.SKEW_NORMAL, Scenario.STUDENT_T3, Scenario.HETEROSCEDASTIC)


def default_truth() -> EtaParams:
    return EtaParams(
        beta_t=np.array([2.5, 2.6]),
        alpha_t=1.8,
        lambda_t=2.0,
        beta_c=np.array([1.8, 0.9]),
        alpha_c=0.5,
        lambda_c=-2.2,
        sigma_t=1.0,
        sigma_c=1.0,
        rho=0.75,
        theta1=1.0,
        theta2=0.5,
    )


def default_cmprsk_truth() -> CmprskParams:
    """Two competing risks and one dependent censoring time, all endogenous."""

    sd = np.array([1.0, 1.2, 1.0])
    corr = np.array([[1.0, 0.3, 0.5], [0.3, 1.0, 0.4], [0.5, 0.4, 1.0]])
    return CmprskParams(
        k=2,
        beta=np.array([[2.0, 1.0], [2.6, -0.5], [1.8, 0.9]]),
        alpha=np.array([1.5, -0.8, 0.5]),
        lam=np.array([1.5, -1.0, -2.2]),
        theta=np.array([1.0, 1.0, 0.5]),
        sigma=corr * np.outer(sd, sd),
    )


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process. ``admin_max=None`` switches administrative censoring off."""

    scenario: Scenario = Scenario.BASELINE
    n: int = 1000
    truth: Optional[EtaParams] = None
    cmprsk_truth: Optional[CmprskParams] = None
    gamma: tuple[float, ...] = DEFAULT_GAMMA
    admin_max: Optional[float] = DEFAULT_ADMIN_MAX
    hetero_scale: float = 0.3
    skewness: float = 0.92
    t_df: float = 3.0
    nu_variance: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.n < 50:
            raise DomainError("simulated samples need n >= 50")
        if len(self.gamma) != 3:
            raise DomainError("gamma holds (intercept, X~, W~) coefficients")
        if self.admin_max is not None and not self.admin_max > 0:
            raise DomainError("admin_max must be positive")
        if self.truth is None and self.scenario is not Scenario.CMPRSK_R3:
            object.__setattr__(self, "truth", default_truth())
        if self.cmprsk_truth is None and self.scenario is Scenario.CMPRSK_R3:
            object.__setattr__(self, "cmprsk_truth", default_cmprsk_truth())

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "DgpSpec":
        settings = dict(settings or {})
        overrides = settings.pop("truth", None) or {}
        settings.pop("N", None)
        settings.pop("calibrate", None)
        settings.pop("fit_link", None)
        unknown = set(settings) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"Unknown simulation settings: {sorted(unknown)}")
        spec = cls(**settings)
        if overrides and spec.truth is not None:
            values = spec.truth.as_dict()
            bad = set(overrides) - set(values)
            if bad:
                raise ValidationError(f"Unknown truth parameters: {sorted(bad)}")
            values.update(overrides)
            spec = replace(spec, truth=EtaParams(**values))
        return spec

    def fitting_first_stage(self) -> FirstStageSpec:
        kind = FirstStageKind.CONTINUOUS_LINEAR if self.scenario.continuous_z else FirstStageKind.BINARY_LOGIT
        return FirstStageSpec(kind=kind)


def gumbel_min_control(index, z):
    """Control value when ``nu`` has the minimum-Gumbel law ``P(nu <= x) = 1 - exp(-e^x)``."""

    c = np.asarray(index, dtype=float)
    zz = np.asarray(z, dtype=float)
    a = np.exp(np.minimum(c, 700.0))
    e1 = special.exp1(a)
    # e^a E1(a); asymptotic series once e^a overflows
    scaled = np.where(a < 50.0, np.exp(np.minimum(a, 50.0)) * e1, (1.0 - 1.0 / a + 2.0 / a**2) / a)
    upper = c + scaled
    lower = (-np.euler_gamma - c * np.exp(-a) - e1) / -np.expm1(-a)
    return np.where(zz > 0.5, lower, upper)


def _covariates(spec: DgpSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    x_tilde = normal(rng, spec.n)
    if spec.scenario in (Scenario.BASELINE, Scenario.CMPRSK_R3):
        w_tilde = (uniform(rng, spec.n) < 0.5).astype(float)
    else:
        w_tilde = uniform(rng, spec.n, 0.0, 2.0)
    return x_tilde, w_tilde


def _endogenous(spec: DgpSpec, rng: np.random.Generator, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = index.shape[0]
    if spec.scenario.continuous_z:
        nu = normal(rng, n, 0.0, math.sqrt(spec.nu_variance))
        return index + nu, nu
    if spec.scenario is Scenario.LINK_PROBIT:
        nu = normal(rng, n)
        z = (index - nu > 0).astype(float)
        return z, probit_control(index, z)
    if spec.scenario is Scenario.LINK_CLOGLOG:
        nu = -gumbel(rng, n)
        z = (index - nu > 0).astype(float)
        return z, gumbel_min_control(index, z)
    nu = logistic(rng, n)
    z = (index - nu > 0).astype(float)
    return z, logistic_control(index, z)


def _errors(spec: DgpSpec, rng: np.random.Generator, truth: EtaParams, x_tilde: np.ndarray) -> np.ndarray:
    cov = np.array(
        [
            [truth.sigma_t**2, truth.rho * truth.sigma_t * truth.sigma_c],
            [truth.rho * truth.sigma_t * truth.sigma_c, truth.sigma_c**2],
        ]
    )
    if spec.scenario is Scenario.SKEW_NORMAL:
        return skew_normal(rng, cov, spec.n, spec.skewness)
    if spec.scenario is Scenario.STUDENT_T3:
        return bivariate_t(rng, cov, spec.n, spec.t_df)
    eps = bivariate_normal(rng, cov, spec.n)
    if spec.scenario is Scenario.HETEROSCEDASTIC:
        eps = eps * np.exp(spec.hetero_scale * x_tilde)[:, None]
    return eps


def _latent_bivariate(spec: DgpSpec, rng: np.random.Generator):
    truth = spec.truth
    x_tilde, w_tilde = _covariates(spec, rng)
    x = np.column_stack([np.ones(spec.n), x_tilde])
    index = np.column_stack([x, w_tilde]) @ np.asarray(spec.gamma)
    z, v = _endogenous(spec, rng, index)
    eps = _errors(spec, rng, truth, x_tilde)
    tau_t = x @ truth.beta_t + z * truth.alpha_t + v * truth.lambda_t
    tau_c = x @ truth.beta_c + z * truth.alpha_c + v * truth.lambda_c
    t = np.asarray(yeo_johnson_inverse(truth.theta1, tau_t + eps[:, 0]))
    c_score = tau_c + eps[:, 1]
    c = np.asarray(yeo_johnson_inverse(truth.theta2, c_score))
    u_admin = uniform(rng, spec.n)
    return x, w_tilde, z, v, t, c, u_admin, c_score


def generate(spec: DgpSpec, stream_id: int = 0) -> Dataset | CmprskDataset:
    """Draw one sample; hidden truth (``v`` and the latent times) goes to ``truth``."""

    rng = stream(spec.seed, stream_id)
    if spec.scenario is Scenario.CMPRSK_R3:
        return _generate_cmprsk(spec, rng)
    x, w_tilde, z, v, t, c, u_admin, _ = _latent_bivariate(spec, rng)
    a = np.full(spec.n, np.inf) if spec.admin_max is None else spec.admin_max * u_admin
    y = np.minimum(np.minimum(t, c), a)
    delta = ((t <= c) & (t <= a)).astype(int)
    xi = ((c < t) & (c <= a)).astype(int)
    truth = pd.DataFrame({"v": v, "t": t, "c": c, "a": a})
    return Dataset(y=y, delta=delta, xi=xi, x=x, w_tilde=w_tilde, z=z, truth=truth)


def _generate_cmprsk(spec: DgpSpec, rng: np.random.Generator) -> CmprskDataset:
    params = spec.cmprsk_truth
    x_tilde, w_tilde = _covariates(spec, rng)
    x = np.column_stack([np.ones(spec.n), x_tilde])
    index = np.column_stack([x, w_tilde]) @ np.asarray(spec.gamma)
    z, v = _endogenous(spec, rng, index)
    eps = multivariate_normal(rng, params.sigma, spec.n)
    tau = params.tau(x, z, v)
    latent = np.column_stack(
        [np.asarray(yeo_johnson_inverse(params.theta[j], tau[:, j] + eps[:, j])) for j in range(params.r)]
    )
    a = np.full(spec.n, np.inf) if spec.admin_max is None else spec.admin_max * uniform(rng, spec.n)
    first = np.argmin(latent, axis=1)
    t_min = latent[np.arange(spec.n), first]
    cause = np.where(t_min <= a, first + 1, ADMIN)
    y = np.minimum(t_min, a)
    truth = pd.DataFrame({"v": v, "a": a, **{f"t{j + 1}": latent[:, j] for j in range(params.r)}})
    return CmprskDataset(y=y, cause=cause, x=x, w_tilde=w_tilde, z=z, r=params.r, truth=truth)


def _admin_bound(k: np.ndarray, u_admin: np.ndarray, target: float) -> float:
    """Bisection for the uniform bound whose draws fall below ``k`` in a ``target`` share of rows."""

    def excess(a_max: float) -> float:
        return float(np.mean(a_max * u_admin < k)) - target

    lo, hi = 1e-6, 1e4 * (float(np.max(np.abs(k))) + 1.0)
    if excess(lo) < 0:
        raise DomainError(f"an administrative share of {target} is not attainable in this design")
    return float(optimize.brentq(excess, lo, hi, xtol=1e-6))


def _calibration_draw(spec: DgpSpec, n: int, stream_id: int):
    if spec.scenario is Scenario.CMPRSK_R3:
        raise DomainError("calibration is defined for the bivariate designs")
    draw = replace(spec, n=n)
    _, _, _, _, t, c, u_admin, c_score = _latent_bivariate(draw, stream(spec.seed, stream_id))
    return t, c, u_admin, c_score


def calibrate_admin_max(spec: DgpSpec, target: float = DEFAULT_ADMIN_SHARE, n: int = 20000,
                        stream_id: int = 10**6) -> float:
    """Upper bound of the uniform admin law giving the target administratively-censored share."""

    if not 0.0 < target < 1.0:
        raise DomainError("target share must lie in (0, 1)")
    t, c, u_admin, _ = _calibration_draw(spec, n, stream_id)
    a_max = _admin_bound(np.minimum(t, c), u_admin, target)
    LOGGER.info("Calibrated admin_max=%.4f for a %.0f%% administrative share", a_max, 100 * target)
    return a_max


def calibrate_shares(spec: DgpSpec, shares: Sequence[float] = DEFAULT_SHARES, n: int = 20000,
                     stream_id: int = 10**6) -> DgpSpec:
    """Shift the C intercept and set ``admin_max`` so the (T, C, A) shares match ``shares``.

    The admin bound alone fixes the administrative share but not the T/C
    split. For every intercept shift the bound is re-solved, and the shift is
    found by bisection on the resulting T share, which increases with it.
    """

    target = np.asarray(shares, dtype=float)
    if target.shape != (3,) or np.any(target <= 0.0) or not math.isclose(float(target.sum()), 1.0, abs_tol=1e-9):
        raise DomainError("shares are three positive (T, C, A) proportions summing to one")
    t, _, u_admin, c_score = _calibration_draw(spec, n, stream_id)
    theta2 = spec.truth.theta2

    def t_excess(shift: float) -> float:
        c = np.asarray(yeo_johnson_inverse(theta2, c_score + shift))
        try:
            a_max = _admin_bound(np.minimum(t, c), u_admin, target[2])
        except DomainError:
            # C so early that too few follow-up times are positive: T share is near zero
            return -target[0]
        return float(np.mean((t <= c) & (t <= a_max * u_admin))) - target[0]

    lo, hi = -CALIBRATION_SHIFT, CALIBRATION_SHIFT
    if t_excess(lo) > 0 or t_excess(hi) < 0:
        raise DomainError(f"shares {tuple(target)} are not attainable within a C-intercept shift of {hi}")
    shift = float(optimize.brentq(t_excess, lo, hi, xtol=1e-5))
    c = np.asarray(yeo_johnson_inverse(theta2, c_score + shift))
    a_max = _admin_bound(np.minimum(t, c), u_admin, target[2])

    values = spec.truth.as_dict()
    beta_c = np.array(values["beta_c"], dtype=float)
    beta_c[0] += shift
    values["beta_c"] = beta_c
    LOGGER.info(
        "Calibrated %s shares %s: C intercept %.4f (shift %+.4f), admin_max=%.4f",
        spec.scenario.value,
        "/".join(f"{s:.2f}" for s in target),
        beta_c[0],
        shift,
        a_max,
    )
    return replace(spec, truth=EtaParams(**values), admin_max=a_max)


# ----------------------------------------------------------------------------
# replication metrics


@dataclass
class ReplicationReport:
    """Per-parameter Monte-Carlo summary (one row per estimator x parameter)."""

    table: pd.DataFrame
    N: int
    failures: dict[str, int] = field(default_factory=dict)
    cif_table: Optional[pd.DataFrame] = None
    global_rmse: dict[str, float] = field(default_factory=dict)

    def failure_rate(self, estimator: str) -> float:
        return self.failures.get(estimator, 0) / self.N

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "failures": self.failures,
            "table": self.table.to_dict(orient="records"),
            "cif_table": None if self.cif_table is None else self.cif_table.to_dict(orient="records"),
            "global_rmse": self.global_rmse,
        }


def summarise(estimates: np.ndarray, truth: np.ndarray, covered: Optional[np.ndarray] = None) -> pd.DataFrame:
    """Bias, ESD (N - 1 denominator), RMSE (N denominator) and coverage per column."""

    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    n_rep = est.shape[0]
    if n_rep < 2:
        raise DomainError("at least two replications are needed")
    err = est - np.asarray(truth, dtype=float)
    frame = pd.DataFrame(
        {
            "truth": np.asarray(truth, dtype=float),
            "mean": est.mean(axis=0),
            "bias": err.mean(axis=0),
            "esd": est.std(axis=0, ddof=1),
            "rmse": np.sqrt(np.mean(err**2, axis=0)),
        }
    )
    if covered is not None:
        cov = np.asarray(covered, dtype=float)
        n_cov = np.isfinite(cov).sum(axis=0)
        frame["cr"] = np.where(n_cov > 0, np.nansum(cov, axis=0) / np.maximum(n_cov, 1), np.nan)
    else:
        frame["cr"] = np.nan
    return frame


def _replication_task(args) -> dict[str, Any]:
    spec, configs, first_stage, stream_id = args
    data = generate(spec, stream_id)
    first_stage_result = None
    out: dict[str, Any] = {}
    for cfg in configs:
        try:
            if cfg.variant in (FitVariant.TWO_STEP, FitVariant.INDEPENDENT) and first_stage_result is not None:
                result = fit(data, first_stage, cfg, first_stage_result=first_stage_result)
            else:
                result = fit(data, first_stage, cfg)
            if cfg.variant in (FitVariant.TWO_STEP, FitVariant.INDEPENDENT):
                first_stage_result = result.first_stage
            lower = upper = None
            if result.ci is not None:
                lower = result.ci["lower"].to_numpy()
                upper = result.ci["upper"].to_numpy()
            out[cfg.variant.value] = {
                "estimates": result.estimates[result.free],
                "lower": lower,
                "upper": upper,
                "free": result.free,
                "names": result.free_names,
            }
        except CfsurvError as exc:
            out[cfg.variant.value] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def replicate(
    spec: DgpSpec,
    configs: Sequence[FitConfig],
    N: int,
    threads: int = 1,
    first_stage: Optional[FirstStageSpec] = None,
) -> ReplicationReport:
    """Repeat generate-and-fit ``N`` times for every estimator configuration.

    ``first_stage`` overrides the design's default fitting link.
    """

    if N < 2:
        raise DomainError("replicate needs N >= 2")
    if spec.scenario is Scenario.CMPRSK_R3:
        raise DomainError("use replicate_cif for the competing-risks design")
    truth_vec = spec.truth.to_vector()
    first_stage = first_stage or spec.fitting_first_stage()
    tasks = [(spec, tuple(configs), first_stage, i) for i in range(N)]
    outcomes = run_tasks(_replication_task, tasks, threads=threads, desc="replications")

    frames, failures = [], {}
    for cfg in configs:
        key = cfg.variant.value
        rows = [o.value[key] for o in outcomes if o.ok and "error" not in o.value[key]]
        failures[key] = N - len(rows)
        if failures[key]:
            LOGGER.warning("%s: %d of %d replications failed", key, failures[key], N)
        if len(rows) < 2:
            continue
        free = rows[0]["free"]
        est = np.vstack([r["estimates"] for r in rows])
        truth = truth_vec[free]
        covered = np.vstack(
            [
                (r["lower"] <= truth) & (truth <= r["upper"]) if r["lower"] is not None else np.full(truth.shape, np.nan)
                for r in rows
            ]
        )
        frame = summarise(est, truth, covered)
        frame.insert(0, "parameter", rows[0]["names"])
        frame.insert(0, "estimator", key)
        frame["n_ok"] = len(rows)
        frames.append(frame)

    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    return ReplicationReport(table=table, N=N, failures=failures)


def cif_metrics(expected, estimated, grid, t_max: float, t_min: float = 1.0) -> tuple[pd.DataFrame, float]:
    """Pointwise RMSE(t) over replications and its integral over ``[t_min, t_max]``."""

    grid = np.asarray(grid, dtype=float)
    expected = np.asarray(expected, dtype=float)
    est = np.atleast_2d(np.asarray(estimated, dtype=float))
    if est.shape[1] != grid.size or expected.shape != grid.shape:
        raise DomainError("curves must be evaluated on the time grid")
    rmse = np.sqrt(np.mean((est - expected) ** 2, axis=0))
    table = pd.DataFrame({"time": grid, "expected": expected, "mean": est.mean(axis=0), "rmse": rmse})
    if not t_max > t_min:
        raise DomainError("t_max must exceed t_min")
    inner = grid[(grid > t_min) & (grid < t_max)]
    points = np.concatenate([[t_min], inner, [t_max]])
    values = np.interp(points, grid, rmse)
    return table, float(integrate.trapezoid(values, points))


def _cif_replication_task(args) -> dict[str, np.ndarray]:
    spec, cfg, times, profile, cause, first_stage, stream_id = args
    data = generate(spec, stream_id)
    x, w_tilde, z = profile
    two_step = fit_cmprsk(data, first_stage, replace(cfg, variant=FitVariant.TWO_STEP), k=spec.cmprsk_truth.k)
    w = np.append(np.asarray(x, dtype=float), w_tilde)
    v_hat = control_value(first_stage, two_step.gamma_hat, w, z)
    naive = fit_cmprsk(
        data,
        first_stage,
        replace(cfg, variant=FitVariant.NAIVE, compute_vcov=False),
        k=spec.cmprsk_truth.k,
    )
    labels = np.where(data.cause <= spec.cmprsk_truth.k, data.cause, 0)
    aj = nonparametric_cif(data.y, labels)
    nonpar = aj.evaluate(cause, times) if cause in aj.causes else np.zeros(len(times))
    return {
        "two-step": cif_curve(two_step.params_hat, cause, times, x, z, v_hat),
        "naive": cif_curve(naive.params_hat, cause, times, x, z, 0.0),
        "nonparametric": np.asarray(nonpar, dtype=float),
    }


def replicate_cif(
    spec: DgpSpec,
    N: int,
    times: Sequence[float],
    *,
    profile: tuple[Sequence[float], float, float] = ((1.0, 0.0), 1.0, 1.0),
    cause: int = 1,
    cfg: FitConfig = FitConfig(compute_vcov=False),
    t_max: Optional[float] = None,
    threads: int = 1,
    first_stage: Optional[FirstStageSpec] = None,
) -> ReplicationReport:
    """Compare two-step, naive and nonparametric CIFs with the expected CIF.

    ``profile`` is ``(x including intercept, w_tilde, z)``.
    """

    if spec.scenario is not Scenario.CMPRSK_R3:
        raise DomainError("replicate_cif needs the competing-risks design")
    if N < 2:
        raise DomainError("replicate_cif needs N >= 2")
    grid = np.asarray(times, dtype=float)
    x, w_tilde, z = profile
    truth = spec.cmprsk_truth
    w = np.append(np.asarray(x, dtype=float), w_tilde)
    v_true = control_value(FirstStageSpec(FirstStageKind.BINARY_LOGIT), np.asarray(spec.gamma), w, z)
    expected = cif_curve(truth, cause, grid, x, z, v_true)

    first_stage = first_stage or spec.fitting_first_stage()
    tasks = [(spec, cfg, grid, profile, cause, first_stage, i) for i in range(N)]
    outcomes = run_tasks(_cif_replication_task, tasks, threads=threads, desc="cif replications")
    ok = [o.value for o in outcomes if o.ok]
    failures = {name: N - len(ok) for name in ("two-step", "naive", "nonparametric")}
    if len(ok) < 2:
        raise DomainError("fewer than two CIF replications succeeded")

    t_max = float(grid.max()) if t_max is None else float(t_max)
    frames, global_rmse = [], {}
    for name in ("two-step", "naive", "nonparametric"):
        curves = np.vstack([o[name] for o in ok])
        table, total = cif_metrics(expected, curves, grid, t_max)
        table.insert(0, "estimator", name)
        frames.append(table)
        global_rmse[name] = total
    LOGGER.info("Global CIF RMSE: %s", ", ".join(f"{k}={v:.4f}" for k, v in global_rmse.items()))
    return ReplicationReport(
        table=pd.DataFrame(),
        N=N,
        failures=failures,
        cif_table=pd.concat(frames, ignore_index=True),
        global_rmse=global_rmse,
    )


def _gof_task(args) -> dict[float, bool]:
    spec, cfg, B, levels, seed, stream_id = args
    data = generate(spec, stream_id)
    fitted = fit(data, spec.fitting_first_stage(), cfg)
    result = bootstrap_gof(data, fitted, B=B, seed=derive_seed(seed, stream_id), threads=1, levels=levels)
    return result.reject_at


def gof_rejection_study(
    spec: DgpSpec,
    B: int = 100,
    n_sim: int = 200,
    levels: Sequence[float] = (0.05, 0.10),
    *,
    cfg: FitConfig = FitConfig(),
    seed: int = 0,
    threads: int = 1,
) -> pd.DataFrame:
    """Rejection rates of the bootstrap test over ``n_sim`` simulated samples."""

    tasks = [(spec, cfg, B, tuple(levels), seed, i) for i in range(n_sim)]
    outcomes = run_tasks(_gof_task, tasks, threads=threads, desc="gof simulations")
    ok = [o.value for o in outcomes if o.ok]
    rows = [
        {
            "scenario": spec.scenario.value,
            "n": spec.n,
            "level": float(level),
            "rejection_rate": float(np.mean([r[level] for r in ok])) if ok else np.nan,
            "n_ok": len(ok),
            "n_failed": n_sim - len(ok),
        }
        for level in levels
    ]
    return pd.DataFrame(rows)


__all__ = [
    "DEFAULT_GAMMA",
    "DEFAULT_SHARES",
    "DgpSpec",
    "ReplicationReport",
    "Scenario",
    "calibrate_admin_max",
    "calibrate_shares",
    "cif_metrics",
    "default_cmprsk_truth",
    "default_truth",
    "generate",
    "gof_rejection_study",
    "gumbel_min_control",
    "replicate",
    "replicate_cif",
    "summarise",
]
