"""Competing risks with dependent censoring.

``r`` latent log-times ``Lambda_theta_j(T^j) = tau_j + eps_j`` with
``eps ~ N(0, Sigma)``; the first ``k`` are competing risks and the remaining
``r - k`` dependent censoring times. The observed cause label is ``j`` in
``1..r`` for the latent time that came first, ``0`` for administrative
censoring.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import integrate, special
from statsmodels.duration.survfunc import CumIncidenceRight

from .data import INTERCEPT, Dataset
from .dist import bvn_tail, check_cov, cov_to_corr, mvn_tail, norm_cdf, norm_logpdf, partial_corr
from .errors import DomainError, InferenceError, NumericError, ValidationError
from .estimator import (
    FitConfig,
    FitVariant,
    ParameterMap,
    best_of,
    confidence_intervals,
    maximize,
    sandwich,
    wald_table,
)
from .firststage import FirstStageResult, FirstStageSpec, fit_first_stage, known_first_stage
from .likelihood import LOG_FLOOR, RHO_EVAL_MAX
from .transform import check_theta, yeo_johnson, yeo_johnson_inverse, yeo_johnson_log_deriv

LOGGER = logging.getLogger(__name__)

MAX_LATENT = 3
CIF_EPSABS = 1e-7
ADMIN = 0


@dataclass(frozen=True)
class CmprskParams:
    """Parameters of the r-variate model.

    ``beta`` is ``r x (m + 1)``; ``alpha``, ``lam`` and ``theta`` have length
    ``r``; ``sigma`` is the ``r x r`` error covariance.
    """

    k: int
    beta: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        r = beta.shape[0]
        object.__setattr__(self, "beta", beta)
        for name in ("alpha", "lam", "theta"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (r,):
                raise DomainError(f"{name} must have one entry per latent time")
            object.__setattr__(self, name, arr)
        if not 2 <= r <= MAX_LATENT:
            raise DomainError(f"the model supports 2 to {MAX_LATENT} latent times, got {r}")
        if not 2 <= int(self.k) <= r:
            raise DomainError("the number of competing risks must satisfy 2 <= k <= r")
        object.__setattr__(self, "k", int(self.k))
        for t in self.theta:
            check_theta(t)
        sigma = check_cov(self.sigma)
        if sigma.shape != (r, r):
            raise DomainError("sigma must be r x r")
        object.__setattr__(self, "sigma", sigma)

    @property
    def r(self) -> int:
        return int(self.beta.shape[0])

    @property
    def n_coef(self) -> int:
        return int(self.beta.shape[1])

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.sigma))

    @property
    def corr(self) -> np.ndarray:
        return cov_to_corr(self.sigma)[1]

    def tau(self, x, z, v) -> np.ndarray:
        """Linear predictors, ``n x r``."""

        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.asarray(z, dtype=float).reshape(-1, 1)
        v = np.asarray(v, dtype=float).reshape(-1, 1)
        return x @ self.beta.T + z * self.alpha + v * self.lam

    def to_vector(self) -> np.ndarray:
        blocks = [np.concatenate([self.beta[j], [self.alpha[j], self.lam[j]]]) for j in range(self.r)]
        corr = self.corr
        pairs = [corr[a, b] for a, b in combinations(range(self.r), 2)]
        return np.concatenate(blocks + [self.sd, pairs, self.theta])

    @classmethod
    def from_vector(cls, vector, r: int, k: int, n_coef: int) -> "CmprskParams":
        vec = np.asarray(vector, dtype=float)
        block = n_coef + 2
        n_pairs = r * (r - 1) // 2
        if vec.shape != (r * block + r + n_pairs + r,):
            raise DomainError("parameter vector has the wrong length")
        coefs = vec[: r * block].reshape(r, block)
        sd = vec[r * block : r * block + r]
        pairs = vec[r * block + r : r * block + r + n_pairs]
        theta = vec[r * block + r + n_pairs :]
        if np.any(sd <= 0):
            raise DomainError("standard deviations must be positive")
        corr = np.eye(r)
        for (a, b), value in zip(combinations(range(r), 2), pairs):
            if not abs(value) < 1.0:
                raise DomainError("correlations must lie inside (-1, 1)")
            corr[a, b] = corr[b, a] = value
        return cls(
            k=k,
            beta=coefs[:, :n_coef],
            alpha=coefs[:, n_coef],
            lam=coefs[:, n_coef + 1],
            theta=theta,
            sigma=corr * np.outer(sd, sd),
        )

    @staticmethod
    def kinds(r: int, n_coef: int) -> list[str]:
        return ["coef"] * (r * (n_coef + 2)) + ["scale"] * r + ["corr"] * (r * (r - 1) // 2) + ["theta"] * r

    @staticmethod
    def names(r: int, covariate_names: Sequence[str]) -> list[str]:
        out: list[str] = []
        for j in range(1, r + 1):
            out += [f"beta{j}[{c}]" for c in covariate_names] + [f"alpha{j}", f"lambda{j}"]
        out += [f"sigma{j}" for j in range(1, r + 1)]
        out += [f"rho{a + 1}{b + 1}" for a, b in combinations(range(r), 2)]
        return out + [f"theta{j}" for j in range(1, r + 1)]

    def permuted(self, order: Sequence[int]) -> "CmprskParams":
        """Relabel latent times; ``order[i]`` is the old index of new time ``i``."""

        idx = np.asarray(order, dtype=int)
        return CmprskParams(
            k=self.k,
            beta=self.beta[idx],
            alpha=self.alpha[idx],
            lam=self.lam[idx],
            theta=self.theta[idx],
            sigma=self.sigma[np.ix_(idx, idx)],
        )


@dataclass(frozen=True)
class CmprskRecord:
    y: float
    delta_star: tuple[int, ...]
    x: np.ndarray
    w_tilde: float
    z: float
    v: Optional[float] = None

    def __post_init__(self) -> None:
        if sum(self.delta_star) != 1 or any(d not in (0, 1) for d in self.delta_star):
            raise ValidationError("exactly one indicator of delta_star must be set")

    @property
    def cause(self) -> int:
        """``1..r`` for a latent time, ``0`` for administrative censoring."""

        pos = self.delta_star.index(1)
        return ADMIN if pos == len(self.delta_star) - 1 else pos + 1


@dataclass
class CmprskDataset:
    """Column-oriented competing-risks data with cause labels in ``0..r``."""

    y: np.ndarray
    cause: np.ndarray
    x: np.ndarray
    w_tilde: np.ndarray
    z: np.ndarray
    r: int
    v: Optional[np.ndarray] = None
    covariate_names: tuple[str, ...] = ()
    truth: Optional[pd.DataFrame] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float)
        self.cause = np.asarray(self.cause, dtype=int)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.w_tilde = np.asarray(self.w_tilde, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if not 2 <= self.r <= MAX_LATENT:
            raise ValidationError(f"r must lie in 2..{MAX_LATENT}")
        if not np.all(np.isfinite(self.y)):
            raise ValidationError("y must be finite")
        if np.any((self.cause < 0) | (self.cause > self.r)):
            raise ValidationError(f"cause labels must lie in 0..{self.r}")
        if not self.covariate_names:
            self.covariate_names = (INTERCEPT,) + tuple(f"x{j}" for j in range(1, self.x.shape[1]))

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def as_first_stage_data(self) -> Dataset:
        zeros = np.zeros(self.n, dtype=int)
        return Dataset(
            y=self.y, delta=zeros, xi=zeros, x=self.x, w_tilde=self.w_tilde, z=self.z,
            covariate_names=self.covariate_names, truth=self.truth,
        )

    def with_control(self, v: np.ndarray) -> "CmprskDataset":
        return replace(self, v=np.asarray(v, dtype=float).copy())

    def record(self, i: int) -> CmprskRecord:
        star = [0] * (self.r + 1)
        star[self.cause[i] - 1 if self.cause[i] != ADMIN else self.r] = 1
        return CmprskRecord(
            y=float(self.y[i]),
            delta_star=tuple(star),
            x=self.x[i].copy(),
            w_tilde=float(self.w_tilde[i]),
            z=float(self.z[i]),
            v=None if self.v is None else float(self.v[i]),
        )

    def counts(self) -> dict[int, int]:
        return {j: int(np.count_nonzero(self.cause == j)) for j in range(self.r + 1)}

    @classmethod
    def from_dataset(cls, data: Dataset) -> "CmprskDataset":
        """Bivariate data as ``r = 2``: T is cause 1, C cause 2."""

        cause = np.where(data.delta == 1, 1, np.where(data.xi == 1, 2, ADMIN))
        return cls(
            y=data.y, cause=cause, x=data.x, w_tilde=data.w_tilde, z=data.z, r=2, v=data.v,
            covariate_names=data.covariate_names, truth=data.truth,
        )

    def to_frame(self, include_truth: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame({"y": self.y, "cause": self.cause})
        for j, name in enumerate(self.covariate_names[1:], start=1):
            frame[name] = self.x[:, j]
        frame["w_tilde"] = self.w_tilde
        frame["z"] = self.z
        if include_truth and self.truth is not None:
            for column in self.truth.columns:
                frame[f"true_{column}"] = self.truth[column].to_numpy()
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, *, r: int, y: str = "y", cause: str = "cause", z: str = "z",
                   instrument: str = "w_tilde", covariates: Sequence[str] = ()) -> "CmprskDataset":
        missing = {y, cause, z, instrument, *covariates} - set(frame.columns)
        if missing:
            raise ValidationError(f"Missing required columns: {sorted(missing)}")
        x = np.column_stack([np.ones(len(frame))] + [frame[c].to_numpy(dtype=float) for c in covariates])
        truth_cols = [c for c in frame.columns if c.startswith("true_")]
        truth = frame[truth_cols].rename(columns=lambda c: c[5:]).reset_index(drop=True) if truth_cols else None
        return cls(
            y=frame[y].to_numpy(dtype=float),
            cause=frame[cause].to_numpy(dtype=int),
            x=x,
            w_tilde=frame[instrument].to_numpy(dtype=float),
            z=frame[z].to_numpy(dtype=float),
            r=r,
            covariate_names=(INTERCEPT, *covariates),
            truth=truth,
        )


@dataclass(frozen=True)
class ConditionalParams:
    """Law of the other latent times given ``T^j``: means ``n x (r-1)``, sds and correlation."""

    cause: int
    others: tuple[int, ...]
    mean: np.ndarray
    sd: np.ndarray
    corr: np.ndarray


def _conditional(params: CmprskParams, j: int, u: np.ndarray, tau: np.ndarray,
                 others: Sequence[int]) -> ConditionalParams:
    """Conditional law given the standardised residual ``u`` of latent time ``j`` (0-based)."""

    corr = params.corr
    sd = params.sd
    others = tuple(others)
    mean = np.column_stack([tau[:, q] + corr[j, q] * sd[q] * u for q in others])
    cond_sd = np.array([sd[q] * math.sqrt(1.0 - corr[j, q] ** 2) for q in others])
    cond_corr = np.eye(len(others))
    for a, b in combinations(range(len(others)), 2):
        qa, qb = others[a], others[b]
        cond_corr[a, b] = cond_corr[b, a] = partial_corr(corr[j, qa], corr[j, qb], corr[qa, qb])
    return ConditionalParams(cause=j + 1, others=tuple(q + 1 for q in others), mean=mean, sd=cond_sd,
                             corr=cond_corr)


def conditional_params(params: CmprskParams, cause: int, y, x, z, v) -> ConditionalParams:
    """``m_{q.j}``, ``s_{q.j}`` and partial correlations of the other latent times given ``T^j = y``."""

    if not 1 <= cause <= params.r:
        raise DomainError(f"cause must lie in 1..{params.r}")
    j = cause - 1
    tau = params.tau(x, z, v)
    lam = np.asarray(yeo_johnson(params.theta[j], np.atleast_1d(y)))
    u = (lam - tau[:, j]) / params.sd[j]
    others = [q for q in range(params.r) if q != j]
    return _conditional(params, j, u, tau, others)


def _log_orthant(args: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """log P(all standardised components exceed ``args``), ``args`` is ``n x d``."""

    d = args.shape[1]
    if d == 1:
        out = special.log_ndtr(-args[:, 0])
    elif d == 2:
        rho = float(np.clip(corr[0, 1], -RHO_EVAL_MAX, RHO_EVAL_MAX))
        out = np.log(np.maximum(np.asarray(bvn_tail(args[:, 0], args[:, 1], rho)), 1e-300))
    else:
        out = np.log(np.maximum(np.asarray(mvn_tail(args, corr)), 1e-300))
    return np.maximum(out, LOG_FLOOR)


def cmprsk_contributions(params: CmprskParams, data: CmprskDataset, v: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-record log sub-densities (administrative-censoring factors omitted)."""

    v = data.v if v is None else v
    if v is None:
        raise ValidationError("dataset has no control values")
    if data.r != params.r or data.x.shape[1] != params.n_coef:
        raise ValidationError("data and parameters disagree on r or the covariate dimension")
    tau = params.tau(data.x, data.z, v)
    sd = params.sd
    corr = params.corr
    lam = np.column_stack([np.asarray(yeo_johnson(params.theta[q], data.y)) for q in range(params.r)])
    b = lam - tau
    out = np.empty(data.n)

    for cause in range(1, params.r + 1):
        rows = data.cause == cause
        if not np.any(rows):
            continue
        j = cause - 1
        others = [q for q in range(params.r) if q != j]
        u = b[rows, j] / sd[j]
        cond = _conditional(params, j, u, tau[rows], others)
        args = (lam[rows][:, others] - cond.mean) / cond.sd
        out[rows] = (
            -math.log(sd[j])
            + norm_logpdf(u)
            + np.asarray(yeo_johnson_log_deriv(params.theta[j], data.y[rows]))
            + _log_orthant(args, cond.corr)
        )

    rows = data.cause == ADMIN
    if np.any(rows):
        out[rows] = _log_orthant(b[rows] / sd, corr)
    return np.where(np.isnan(out), -np.inf, out)


def cmprsk_loglik(params: CmprskParams, data: CmprskDataset) -> float:
    """Average log-likelihood, the r-variate analogue of ``likelihood.sample_loglik``."""

    contrib = cmprsk_contributions(params, data)
    if not np.all(np.isfinite(contrib)):
        return -math.inf
    return math.fsum(contrib.tolist()) / data.n


@dataclass
class CmprskFitResult:
    params_hat: CmprskParams
    gamma_hat: np.ndarray
    loglik: float
    vcov: Optional[np.ndarray]
    ci: Optional[pd.DataFrame]
    converged: bool
    n_iter: int
    variant: FitVariant
    names: list[str]
    free: np.ndarray
    kinds: list[str]
    n_obs: int
    first_stage: Optional[FirstStageResult] = field(default=None, repr=False)
    starts: list[dict] = field(default_factory=list, repr=False)
    config: Optional[FitConfig] = field(default=None, repr=False)

    @property
    def estimates(self) -> np.ndarray:
        return self.params_hat.to_vector()

    def summary(self) -> pd.DataFrame:
        return wald_table(self)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "n_obs": self.n_obs,
            "loglik": self.loglik,
            "r": self.params_hat.r,
            "k": self.params_hat.k,
            "estimates": dict(zip(self.names, self.estimates.tolist())),
            "gamma_hat": np.asarray(self.gamma_hat).tolist(),
            "table": None if self.vcov is None else self.summary().reset_index().to_dict(orient="records"),
        }


def _crude_start(data: CmprskDataset, theta: np.ndarray, use_v: bool) -> np.ndarray:
    r = data.r
    blocks, sds = [], []
    design = np.column_stack([data.x, data.z] + ([data.v] if use_v else []))
    for j in range(r):
        rows = data.cause == j + 1
        target = np.asarray(yeo_johnson(theta[j], data.y[rows]))
        ols = sm.OLS(target, design[rows]).fit()
        params = np.asarray(ols.params, dtype=float)
        if not use_v:
            params = np.append(params, 0.0)
        blocks.append(params)
        sds.append(math.sqrt(max(float(ols.scale), 1e-4)))
    return np.concatenate(blocks + [np.asarray(sds), np.zeros(r * (r - 1) // 2), theta])


def _fixed_slots(cfg: FitConfig, r: int, n_coef: int, theta_fixed: Optional[np.ndarray],
                 independent: bool = False) -> dict[int, float]:
    block = n_coef + 2
    fixed: dict[int, float] = {}
    if cfg.variant is FitVariant.NAIVE:
        for j in range(r):
            fixed[j * block + n_coef + 1] = 0.0
    n_pairs = r * (r - 1) // 2
    corr_start = r * block + r
    if cfg.variant is FitVariant.INDEPENDENT or independent:
        for i in range(n_pairs):
            fixed[corr_start + i] = 0.0
    if theta_fixed is not None:
        for j in range(r):
            fixed[corr_start + n_pairs + j] = float(theta_fixed[j])
    return fixed


def fit_cmprsk(
    data: CmprskDataset,
    first_stage: FirstStageSpec,
    cfg: FitConfig = FitConfig(),
    *,
    k: Optional[int] = None,
    theta_fixed: Optional[Sequence[float]] = None,
    first_stage_result: Optional[FirstStageResult] = None,
    start: Optional[CmprskParams] = None,
) -> CmprskFitResult:
    """Two-step (or naive/independent/oracle) fit of the r-variate model.

    ``k`` defaults to ``r`` (no dependent censoring). ``theta_fixed`` holds one
    exponent per latent time; for ``r = 2`` the pair of ``cfg.theta_fixed``
    is used when it is not given.
    """

    r = data.r
    k = r if k is None else int(k)
    counts = data.counts()
    if any(counts[j] < cfg.min_events for j in range(1, r + 1)):
        raise ValidationError(f"every latent time needs at least {cfg.min_events} observed events, got {counts}")
    if theta_fixed is None and cfg.theta_fixed is not None:
        if r != 2:
            raise ValidationError("give one fixed transformation exponent per latent time")
        theta_fixed = cfg.theta_fixed
    theta_fixed_arr = None if theta_fixed is None else np.array([check_theta(t) for t in theta_fixed])
    if theta_fixed_arr is not None and theta_fixed_arr.shape != (r,):
        raise ValidationError("theta_fixed must have one entry per latent time")

    fs_data = data.as_first_stage_data()
    if first_stage_result is not None:
        fs = first_stage_result
    elif cfg.variant is FitVariant.NAIVE:
        fs = known_first_stage(fs_data, first_stage, np.zeros(data.n))
    elif cfg.variant is FitVariant.ORACLE:
        fs = known_first_stage(fs_data, first_stage, fs_data.true_control())
    else:
        fs = fit_first_stage(fs_data, first_stage)
    work = data.with_control(fs.v_hat)

    n_coef = data.x.shape[1]
    kinds = CmprskParams.kinds(r, n_coef)
    pmap = ParameterMap(kinds, _fixed_slots(cfg, r, n_coef, theta_fixed_arr))

    def loglik(natural: np.ndarray) -> float:
        return cmprsk_loglik(CmprskParams.from_vector(natural, r, k, n_coef), work)

    n_pairs = r * (r - 1) // 2
    corr_start = r * (n_coef + 2) + r
    if start is not None:
        first = start.to_vector()
        for idx, value in pmap.fixed.items():
            first[idx] = value
        starts = [first]
    else:
        theta0 = np.ones(r) if theta_fixed_arr is None else theta_fixed_arr
        crude = _crude_start(work, theta0, cfg.variant is not FitVariant.NAIVE)
        indep_map = ParameterMap(kinds, _fixed_slots(cfg, r, n_coef, theta_fixed_arr, independent=True))
        first = maximize(loglik, crude, indep_map, cfg).natural
        starts = [first]
        for rho in (0.5, -0.3):
            for theta in (1.0, 0.5, 1.5):
                if len(starts) >= cfg.n_starts:
                    break
                cand = first.copy()
                if corr_start not in pmap.fixed:
                    cand[corr_start : corr_start + n_pairs] = rho
                if theta_fixed_arr is None:
                    cand[corr_start + n_pairs :] = theta
                try:
                    CmprskParams.from_vector(cand, r, k, n_coef)
                except DomainError:
                    continue
                if not any(np.allclose(cand, s) for s in starts):
                    starts.append(cand)

    best, diagnostics = best_of(loglik, starts, pmap, cfg)
    params_hat = CmprskParams.from_vector(best.natural, r, k, n_coef)
    names = CmprskParams.names(r, data.covariate_names)
    LOGGER.info("Fitted %s competing-risks model (r=%d, k=%d): loglik=%.6f", cfg.variant.value, r, k, best.loglik)

    vcov = ci = None
    if cfg.compute_vcov:
        def contrib(natural: np.ndarray, v: np.ndarray) -> np.ndarray:
            return cmprsk_contributions(CmprskParams.from_vector(natural, r, k, n_coef), work, v)

        try:
            vcov = sandwich(
                contrib,
                best.natural,
                pmap,
                fs,
                lambda gamma: fs.control_at(fs_data, gamma),
                cfg.fd_step,
            )
            ci = confidence_intervals(best.natural, vcov, cfg.level, kinds=kinds, free=pmap.free, names=names)
        except (InferenceError, DomainError, np.linalg.LinAlgError) as exc:
            LOGGER.warning("Variance estimation failed: %s", exc)
            vcov = ci = None

    estimated = cfg.variant in (FitVariant.TWO_STEP, FitVariant.INDEPENDENT)
    return CmprskFitResult(
        params_hat=params_hat,
        gamma_hat=np.asarray(fs.gamma_hat if estimated else [], dtype=float),
        loglik=best.loglik,
        vcov=vcov,
        ci=ci,
        converged=best.converged,
        n_iter=best.n_iter,
        variant=cfg.variant,
        names=names,
        free=pmap.free,
        kinds=kinds,
        n_obs=data.n,
        first_stage=fs,
        starts=diagnostics,
        config=cfg,
    )


def cif_curve(params: CmprskParams, cause: int, times, x, z: float, v: float) -> np.ndarray:
    """Cumulative incidence ``P(T^j <= t, cause j first among the k risks)`` on a grid of log-times.

    The integral over the density of ``T^j`` is taken in ``p = Phi(u)``, with
    ``u`` the standardised residual of ``T^j``, between consecutive grid
    points; the running sum keeps the curve non-decreasing.
    """

    if not 1 <= cause <= params.k:
        raise DomainError(f"cause must lie in 1..{params.k}")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.isnan(t)):
        raise DomainError("times must not be NaN")
    j = cause - 1
    tau = params.tau(np.atleast_2d(x), np.atleast_1d(z), np.atleast_1d(v))
    sd = params.sd
    others = [q for q in range(params.k) if q != j]
    cond = _conditional(params, j, np.zeros(1), tau, others)
    corr = params.corr
    slopes = np.array([corr[j, q] * sd[q] for q in others])

    def integrand(p: float) -> float:
        u = special.ndtri(min(max(p, 1e-300), 1.0 - 1e-16))
        e = float(yeo_johnson_inverse(params.theta[j], tau[0, j] + sd[j] * u))
        lam = np.array([yeo_johnson(params.theta[q], e) for q in others])
        args = (lam - (tau[0, others] + slopes * u)) / cond.sd
        return float(np.exp(_log_orthant(args[None, :], cond.corr))[0])

    lam_t = np.where(t > 0, np.inf, -np.inf)
    finite = np.isfinite(t)
    lam_t[finite] = np.asarray(yeo_johnson(params.theta[j], t[finite]))
    upper = norm_cdf((lam_t - tau[0, j]) / sd[j])
    order = np.argsort(t)

    out = np.empty(t.size)
    total, prev = 0.0, 0.0
    for i in order:
        p_hi = float(upper[i])
        if p_hi > prev:
            value, abserr = integrate.quad(integrand, prev, p_hi, epsabs=CIF_EPSABS, limit=200)
            if not np.isfinite(value) or abserr > 10.0 * CIF_EPSABS:
                raise NumericError(f"CIF quadrature did not converge (error estimate {abserr:.2e})")
            total += value
            prev = p_hi
        out[i] = total
    return np.clip(out, 0.0, 1.0)


def cif(params: CmprskParams, cause: int, t: float, x, z: float, v: float) -> float:
    """Cumulative incidence of ``cause`` by log-time ``t`` at one covariate profile."""

    return float(cif_curve(params, cause, [t], x, z, v)[0])


@dataclass(frozen=True)
class NonparametricCif:
    """Aalen-Johansen curves; ``cif[i, j-1]`` is cause ``j`` just after ``times[i]``."""

    times: np.ndarray
    cif: np.ndarray
    causes: tuple[int, ...]

    def evaluate(self, cause: int, t) -> np.ndarray:
        col = self.causes.index(cause)
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return np.where(idx >= 0, self.cif[np.maximum(idx, 0), col], 0.0)


def nonparametric_cif(times, cause_labels) -> NonparametricCif:
    """Aalen-Johansen estimator (statsmodels ``CumIncidenceRight``); label 0 marks a censored record."""

    t = np.asarray(times, dtype=float)
    labels = np.asarray(cause_labels, dtype=int)
    if t.size == 0:
        raise DomainError("nonparametric_cif needs at least one observation")
    if t.shape != labels.shape or np.any(labels < 0):
        raise DomainError("times and non-negative cause labels must have equal length")
    causes = tuple(int(c) for c in np.unique(labels[labels > 0]))
    if not causes:
        uniq = np.unique(t)
        return NonparametricCif(times=uniq, cif=np.zeros((uniq.size, 0)), causes=causes)
    # the variance recursion divides by n - d, which is zero once every record at risk fails
    with np.errstate(divide="ignore", invalid="ignore"):
        estimate = CumIncidenceRight(t, labels)
    curves = np.column_stack([np.asarray(estimate.cinc[c - 1], dtype=float) for c in causes])
    return NonparametricCif(times=np.asarray(estimate.times, dtype=float), cif=curves, causes=causes)


__all__ = [
    "ADMIN",
    "CmprskDataset",
    "CmprskFitResult",
    "CmprskParams",
    "CmprskRecord",
    "ConditionalParams",
    "NonparametricCif",
    "cif",
    "cif_curve",
    "cmprsk_contributions",
    "cmprsk_loglik",
    "conditional_params",
    "fit_cmprsk",
    "nonparametric_cif",
]
