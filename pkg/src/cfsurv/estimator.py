"""Two-step maximum likelihood for the dependent-censoring model.

The first stage supplies control values; the second stage maximises the
average log-likelihood over an unconstrained reparameterisation (log for
scales, atanh for correlations, scaled logit for transformation exponents)
with BFGS and central finite-difference gradients. Variances follow the
two-step sandwich formula including the first-stage correction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import optimize, special

from .data import Dataset
from .dist import norm_cdf, norm_quantile, norm_sf
from .errors import ConvergenceError, DomainError, InferenceError, ValidationError
from .firststage import FirstStageResult, FirstStageSpec, fit_first_stage, known_first_stage
from .likelihood import RHO_EVAL_MAX, EtaParams, contributions, sample_loglik
from .transform import check_theta, yeo_johnson

LOGGER = logging.getLogger(__name__)

HESSIAN_STEP = float(np.finfo(float).eps ** (1.0 / 3.0))
PENALTY = 1e10
THETA_JITTER = (1.0, 0.5, 1.5)
RHO_JITTER = (0.5, -0.5, 0.0)


class FitVariant(str, Enum):
    TWO_STEP = "two-step"
    NAIVE = "naive"
    INDEPENDENT = "independent"
    ORACLE = "oracle"


_ESTIMATED_CONTROL = (FitVariant.TWO_STEP, FitVariant.INDEPENDENT)


@dataclass(frozen=True)
class FitConfig:
    """Estimator settings.

    ``theta_fixed=None`` estimates both transformation exponents; a pair
    fixes them (``(1, 1)`` fits the untransformed model).
    """

    variant: FitVariant = FitVariant.TWO_STEP
    theta_fixed: Optional[tuple[float, float]] = None
    gtol: float = 1e-7
    max_iter: int = 500
    n_starts: int = 3
    fd_step: float = 1e-6
    level: float = 0.95
    min_events: int = 10
    compute_vcov: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", FitVariant(self.variant))
        if self.theta_fixed is not None:
            pair = tuple(check_theta(t) for t in self.theta_fixed)
            if len(pair) != 2:
                raise DomainError("theta_fixed needs exactly two values")
            object.__setattr__(self, "theta_fixed", pair)
        if self.gtol <= 0 or self.fd_step <= 0 or self.max_iter < 1:
            raise DomainError("optimizer tolerances must be positive")
        if self.n_starts < 1:
            raise DomainError("n_starts must be at least 1")
        if not 0.0 < self.level < 1.0:
            raise DomainError("level must lie in (0, 1)")

    @property
    def theta_mode(self) -> str:
        return "estimate" if self.theta_fixed is None else "fixed"

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "FitConfig":
        settings = dict(settings or {})
        theta_fixed = None
        if str(settings.pop("theta_mode", "estimate")) == "fixed":
            theta_fixed = tuple(settings.pop("theta_fixed", (1.0, 1.0)))
        else:
            settings.pop("theta_fixed", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(settings) - known
        if unknown:
            raise ValidationError(f"Unknown fit settings: {sorted(unknown)}")
        return cls(theta_fixed=theta_fixed, **settings)


# ----------------------------------------------------------------------------
# reparameterisation and numerical derivatives


class ParameterMap:
    """Maps the free natural-scale parameters to an unconstrained vector.

    ``kinds`` holds one of ``coef``, ``scale``, ``corr``, ``theta`` per slot;
    ``fixed`` maps slot index to a held value.
    """

    def __init__(self, kinds: Sequence[str], fixed: Mapping[int, float] | None = None) -> None:
        self.kinds = np.asarray(list(kinds))
        self.fixed = {int(k): float(v) for k, v in (fixed or {}).items()}
        self.free = np.array([i for i in range(len(self.kinds)) if i not in self.fixed], dtype=int)

    @property
    def size(self) -> int:
        return int(self.kinds.shape[0])

    @property
    def free_kinds(self) -> np.ndarray:
        return self.kinds[self.free]

    def complete(self, free_values: np.ndarray) -> np.ndarray:
        full = np.empty(self.size)
        for idx, value in self.fixed.items():
            full[idx] = value
        full[self.free] = free_values
        return full

    def to_unconstrained(self, natural: np.ndarray) -> np.ndarray:
        x = np.asarray(natural, dtype=float)[self.free].copy()
        kinds = self.free_kinds
        x[kinds == "scale"] = np.log(x[kinds == "scale"])
        x[kinds == "corr"] = np.arctanh(np.clip(x[kinds == "corr"], -RHO_EVAL_MAX, RHO_EVAL_MAX))
        x[kinds == "theta"] = special.logit(np.clip(x[kinds == "theta"], 1e-6, 2.0 - 1e-6) / 2.0)
        return x

    def to_natural(self, u: np.ndarray) -> np.ndarray:
        x = np.asarray(u, dtype=float).copy()
        kinds = self.free_kinds
        x[kinds == "scale"] = np.exp(x[kinds == "scale"])
        x[kinds == "corr"] = np.tanh(x[kinds == "corr"])
        x[kinds == "theta"] = 2.0 * special.expit(x[kinds == "theta"])
        return self.complete(x)


def fd_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray, rel_step: float) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_j|)``."""

    h = rel_step * np.maximum(1.0, np.abs(x))
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        grad[j] = (fun(x + e) - fun(x - e)) / (2.0 * h[j])
    return grad


def _safe_steps(x: np.ndarray, kinds: np.ndarray, h: np.ndarray, reach: float = 1.0) -> np.ndarray:
    """Shrink steps so ``x +- reach * h`` stays inside each parameter's domain."""

    dist = np.full_like(x, np.inf)
    dist = np.where(kinds == "scale", x, dist)
    dist = np.where(kinds == "corr", 1.0 - np.abs(x), dist)
    dist = np.where(kinds == "theta", np.minimum(x, 2.0 - x), dist)
    steps = np.minimum(h, 0.5 * dist / reach)
    if np.any(steps <= 0):
        raise InferenceError("a free parameter sits on the boundary of its domain")
    return steps


def score_rows(contrib: Callable[[np.ndarray], np.ndarray], x: np.ndarray, kinds: np.ndarray,
               rel_step: float) -> np.ndarray:
    """Per-observation gradients of ``contrib`` by central differences, ``n x p``."""

    h = _safe_steps(x, kinds, rel_step * np.maximum(1.0, np.abs(x)))
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        cols.append((contrib(x + e) - contrib(x - e)) / (2.0 * h[j]))
    return np.column_stack(cols)


def fd_hessian(fun: Callable[[np.ndarray], float], x: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    h = _safe_steps(x, kinds, HESSIAN_STEP * np.maximum(1.0, np.abs(x)), reach=2.0)
    p = x.size
    f0 = fun(x)
    hess = np.empty((p, p))
    for j in range(p):
        ej = np.zeros(p)
        ej[j] = h[j]
        hess[j, j] = (fun(x + 2 * ej) - 2.0 * f0 + fun(x - 2 * ej)) / (4.0 * h[j] * h[j])
        for k in range(j):
            ek = np.zeros(p)
            ek[k] = h[k]
            value = (fun(x + ej + ek) - fun(x + ej - ek) - fun(x - ej + ek) + fun(x - ej - ek)) / (
                4.0 * h[j] * h[k]
            )
            hess[j, k] = hess[k, j] = value
    return hess


def fd_cross_hessian(fun: Callable[[np.ndarray, np.ndarray], float], x: np.ndarray, kinds: np.ndarray,
                     gamma: np.ndarray) -> np.ndarray:
    """Mixed second differences ``d^2 fun / d x d gamma``, ``p x q``."""

    h = _safe_steps(x, kinds, HESSIAN_STEP * np.maximum(1.0, np.abs(x)))
    g = HESSIAN_STEP * np.maximum(1.0, np.abs(gamma))
    out = np.empty((x.size, gamma.size))
    for j in range(x.size):
        ej = np.zeros(x.size)
        ej[j] = h[j]
        for k in range(gamma.size):
            ek = np.zeros(gamma.size)
            ek[k] = g[k]
            out[j, k] = (
                fun(x + ej, gamma + ek) - fun(x + ej, gamma - ek) - fun(x - ej, gamma + ek) + fun(x - ej, gamma - ek)
            ) / (4.0 * h[j] * g[k])
    return out


@dataclass
class Optimum:
    natural: np.ndarray
    loglik: float
    start_loglik: float
    n_iter: int
    converged: bool
    message: str
    grad_norm: float


def maximize(loglik: Callable[[np.ndarray], float], start: np.ndarray, pmap: ParameterMap,
             cfg: FitConfig) -> Optimum:
    """BFGS on the unconstrained scale from one natural-scale start."""

    def objective(u: np.ndarray) -> float:
        try:
            value = loglik(pmap.to_natural(u))
        except DomainError:
            return PENALTY
        return -value if math.isfinite(value) else PENALTY

    def gradient(u: np.ndarray) -> np.ndarray:
        return fd_gradient(objective, u, cfg.fd_step)

    u0 = pmap.to_unconstrained(start)
    start_value = -objective(u0)
    result = optimize.minimize(
        objective,
        u0,
        jac=gradient,
        method="BFGS",
        options={"gtol": cfg.gtol, "maxiter": cfg.max_iter},
    )
    grad_norm = float(np.max(np.abs(result.jac))) if result.jac is not None and result.jac.size else 0.0
    # precision loss in the line search with a small gradient is accepted as converged
    converged = bool(result.success) or (result.status == 2 and grad_norm < 1e-4)
    LOGGER.debug(
        "BFGS finished: loglik=%.8f iterations=%d status=%d |grad|=%.3g",
        -result.fun,
        result.nit,
        result.status,
        grad_norm,
    )
    return Optimum(
        natural=pmap.to_natural(result.x),
        loglik=float(-result.fun),
        start_loglik=float(start_value),
        n_iter=int(result.nit),
        converged=converged,
        message=str(result.message),
        grad_norm=grad_norm,
    )


def best_of(loglik: Callable[[np.ndarray], float], starts: Sequence[np.ndarray], pmap: ParameterMap,
            cfg: FitConfig) -> tuple[Optimum, list[dict]]:
    """Run :func:`maximize` from every start and keep the best converged run.

    When an unconverged run ends above every converged one, BFGS is restarted
    from its last iterate; the restart replaces it if it converges. Otherwise
    the best converged run is kept and the higher unconverged value is logged
    and recorded in its diagnostics row (``above_best``).
    """

    runs = [maximize(loglik, s, pmap, cfg) for s in starts]
    finite = [i for i, r in enumerate(runs) if math.isfinite(r.loglik)]
    top = max(finite, key=lambda i: runs[i].loglik) if finite else None
    if top is not None and not runs[top].converged:
        restart = maximize(loglik, runs[top].natural, pmap, cfg)
        if restart.converged and restart.loglik >= runs[top].loglik:
            LOGGER.debug("Restart from the best unconverged iterate converged at loglik=%.8f", restart.loglik)
            runs[top] = restart
    diagnostics = [
        {
            "start": i,
            "loglik": r.loglik,
            "start_loglik": r.start_loglik,
            "n_iter": r.n_iter,
            "converged": r.converged,
            "message": r.message,
            "grad_norm": r.grad_norm,
        }
        for i, r in enumerate(runs)
    ]
    converged = [r for r in runs if r.converged]
    if not converged:
        best = max(runs, key=lambda r: r.loglik)
        raise ConvergenceError(
            f"none of {len(runs)} optimizer starts converged",
            last_iterate=best.natural,
            diagnostics={"starts": diagnostics},
        )
    best = max(converged, key=lambda r: r.loglik)
    for row, run in zip(diagnostics, runs):
        row["above_best"] = (not run.converged) and math.isfinite(run.loglik) and run.loglik > best.loglik
        if row["above_best"]:
            LOGGER.warning(
                "Start %d stopped unconverged at loglik=%.6f, above the best converged %.6f",
                row["start"],
                run.loglik,
                best.loglik,
            )
    return best, diagnostics


def sandwich(contrib: Callable[[np.ndarray, np.ndarray], np.ndarray], natural_hat: np.ndarray,
             pmap: ParameterMap, first_stage: FirstStageResult,
             control_at: Callable[[np.ndarray], np.ndarray], fd_step: float) -> np.ndarray:
    """Two-step sandwich covariance of the free parameters on the natural scale.

    ``contrib(natural_full, v)`` returns per-observation log-likelihood
    contributions for control values ``v``.
    """

    x_hat = natural_hat[pmap.free]
    kinds = pmap.free_kinds
    v_hat = first_stage.v_hat

    def rows(x: np.ndarray) -> np.ndarray:
        return contrib(pmap.complete(x), v_hat)

    def mean_loglik(x: np.ndarray) -> float:
        return float(np.mean(rows(x)))

    h_l = score_rows(rows, x_hat, kinds, fd_step)
    n = h_l.shape[0]
    hess = fd_hessian(mean_loglik, x_hat, kinds)
    if not np.all(np.isfinite(hess)) or np.linalg.cond(hess) > 1e14:
        raise InferenceError("Hessian of the log-likelihood is singular")
    hess_inv = np.linalg.inv(hess)

    middle_rows = h_l
    if np.any(first_stage.score_rows != 0.0):
        gamma_hat = np.asarray(first_stage.gamma_hat, dtype=float)

        def mean_at(x: np.ndarray, gamma: np.ndarray) -> float:
            return float(np.mean(contrib(pmap.complete(x), control_at(gamma))))

        h_gamma = fd_cross_hessian(mean_at, x_hat, kinds, gamma_hat)
        middle_rows = h_l + first_stage.influence() @ h_gamma.T

    middle = middle_rows.T @ middle_rows / n
    vcov = hess_inv @ middle @ hess_inv.T / n
    return 0.5 * (vcov + vcov.T)


# ----------------------------------------------------------------------------
# the main model


def _fixed_slots(cfg: FitConfig, n_coef: int, independent: bool = False) -> dict[int, float]:
    m = n_coef
    fixed: dict[int, float] = {}
    if cfg.variant is FitVariant.NAIVE:
        fixed[m + 1] = 0.0
        fixed[2 * m + 3] = 0.0
    if cfg.variant is FitVariant.INDEPENDENT or independent:
        fixed[2 * m + 6] = 0.0
    if cfg.theta_fixed is not None:
        fixed[2 * m + 7] = cfg.theta_fixed[0]
        fixed[2 * m + 8] = cfg.theta_fixed[1]
    return fixed


def _control_stage(data: Dataset, spec: FirstStageSpec, cfg: FitConfig,
                   first_stage_result: Optional[FirstStageResult]) -> FirstStageResult:
    if first_stage_result is not None:
        return first_stage_result
    if cfg.variant is FitVariant.NAIVE:
        return known_first_stage(data, spec, np.zeros(data.n))
    if cfg.variant is FitVariant.ORACLE:
        return known_first_stage(data, spec, data.true_control())
    return fit_first_stage(data, spec)


def _crude_start(data: Dataset, cfg: FitConfig) -> np.ndarray:
    """OLS of the transformed times on the covariates among the observed events."""

    theta1, theta2 = cfg.theta_fixed or (1.0, 1.0)
    use_v = cfg.variant is not FitVariant.NAIVE
    design = np.column_stack([data.x, data.z, data.v if use_v else np.zeros(data.n)])
    blocks = []
    for theta, rows in ((theta1, data.delta == 1), (theta2, data.xi == 1)):
        target = np.asarray(yeo_johnson(theta, data.y[rows]))
        cols = design[rows] if use_v else design[rows][:, :-1]
        ols = sm.OLS(target, cols).fit()
        params = np.asarray(ols.params, dtype=float)
        if not use_v:
            params = np.append(params, 0.0)
        sigma = float(np.sqrt(max(ols.scale, 1e-4)))
        blocks.append((params, sigma))
    (coef_t, sigma_t), (coef_c, sigma_c) = blocks
    return np.concatenate([coef_t, coef_c, [sigma_t, sigma_c, 0.0, theta1, theta2]])


def _jittered(base: np.ndarray, n_coef: int, cfg: FitConfig, pmap: ParameterMap) -> list[np.ndarray]:
    m = n_coef
    out: list[np.ndarray] = []
    seen: set[tuple[float, float]] = set()
    for rho in RHO_JITTER:
        for theta in THETA_JITTER:
            start = base.copy()
            if (2 * m + 6) not in pmap.fixed:
                start[2 * m + 6] = rho
            if (2 * m + 7) not in pmap.fixed:
                start[2 * m + 7] = theta
                start[2 * m + 8] = theta
            key = (round(float(start[2 * m + 6]), 12), round(float(start[2 * m + 7]), 12))
            if key in seen or np.allclose(start, base):
                continue
            seen.add(key)
            out.append(start)
    return out


def _check_events(data: Dataset, min_events: int) -> None:
    counts = data.event_counts()
    if counts["T"] < min_events or counts["C"] < min_events:
        raise ValidationError(
            f"need at least {min_events} observed T and C events, got T={counts['T']} C={counts['C']}"
        )


@dataclass
class FitResult:
    """Estimates, covariance and intervals of a second-stage fit.

    ``vcov`` covers the free parameters (``free`` indexes into the full
    vector) on the natural scale; it is ``None`` when the Hessian was
    singular.
    """

    eta_hat: EtaParams
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
    level: float = 0.95
    first_stage: Optional[FirstStageResult] = field(default=None, repr=False)
    starts: list[dict] = field(default_factory=list, repr=False)
    config: Optional[FitConfig] = field(default=None, repr=False)

    @property
    def estimates(self) -> np.ndarray:
        return self.eta_hat.to_vector()

    @property
    def free_names(self) -> list[str]:
        return [self.names[i] for i in self.free]

    @property
    def se(self) -> Optional[pd.Series]:
        if self.vcov is None:
            return None
        return pd.Series(np.sqrt(np.clip(np.diag(self.vcov), 0.0, None)), index=self.free_names, name="se")

    def vcov_frame(self) -> Optional[pd.DataFrame]:
        if self.vcov is None:
            return None
        return pd.DataFrame(self.vcov, index=self.free_names, columns=self.free_names)

    def summary(self) -> pd.DataFrame:
        return wald_table(self)

    def to_dict(self) -> dict:
        table = self.summary() if self.vcov is not None else None
        return {
            "variant": self.variant.value,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "n_obs": self.n_obs,
            "loglik": self.loglik,
            "estimates": dict(zip(self.names, self.estimates.tolist())),
            "gamma_hat": np.asarray(self.gamma_hat).tolist(),
            "fixed": [self.names[i] for i in range(len(self.names)) if i not in set(self.free.tolist())],
            "table": None if table is None else table.reset_index().to_dict(orient="records"),
            "vcov": None if self.vcov is None else self.vcov.tolist(),
            "starts": self.starts,
        }


def confidence_intervals(eta_hat: EtaParams | np.ndarray, vcov: np.ndarray, level: float = 0.95, *,
                         kinds: Optional[Sequence[str]] = None, free: Optional[Sequence[int]] = None,
                         names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Wald intervals; log scale for standard deviations, atanh scale for correlations."""

    values = eta_hat.to_vector() if isinstance(eta_hat, EtaParams) else np.asarray(eta_hat, dtype=float)
    if kinds is None:
        if not isinstance(eta_hat, EtaParams):
            raise ValidationError("kinds are required for a plain parameter vector")
        kinds = EtaParams.kinds(eta_hat.n_coef)
    free_idx = np.arange(values.size) if free is None else np.asarray(free, dtype=int)
    labels = [f"p{i}" for i in range(values.size)] if names is None else list(names)
    vcov = np.asarray(vcov, dtype=float)
    if vcov.shape != (free_idx.size, free_idx.size):
        raise ValidationError("vcov does not match the free parameters")
    crit = float(norm_quantile(0.5 + level / 2.0))

    rows = []
    for pos, idx in enumerate(free_idx):
        est = float(values[idx])
        se = math.sqrt(max(vcov[pos, pos], 0.0))
        kind = kinds[idx]
        if kind == "scale":
            half = crit * se / est
            lower, upper = est * math.exp(-half), est * math.exp(half)
        elif kind == "corr":
            center = math.atanh(max(-RHO_EVAL_MAX, min(RHO_EVAL_MAX, est)))
            half = crit * se / (1.0 - est * est)
            lower, upper = math.tanh(center - half), math.tanh(center + half)
        else:
            lower, upper = est - crit * se, est + crit * se
        rows.append({"parameter": labels[idx], "estimate": est, "se": se, "lower": lower, "upper": upper})
    return pd.DataFrame(rows).set_index("parameter")


def wald_table(fit: FitResult) -> pd.DataFrame:
    """Estimates with SE, interval and two-sided Wald p-value.

    Transformation exponents are tested against 1, everything else against 0.
    """

    if fit.vcov is None or fit.ci is None:
        raise InferenceError("no covariance matrix available for this fit")
    table = fit.ci.copy()
    nulls = [1.0 if fit.kinds[i] == "theta" else 0.0 for i in fit.free]
    table["null"] = nulls
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = (table["estimate"] - table["null"]) / table["se"]
    table["z"] = stat
    table["p_value"] = 2.0 * norm_sf(np.abs(stat.to_numpy()))
    return table


def sandwich_vcov(data: Dataset, first_stage_result: FirstStageResult, eta_hat: EtaParams,
                  *, fixed: Mapping[int, float] | None = None, fd_step: float = 1e-6) -> np.ndarray:
    """Sandwich covariance of the free components of ``eta_hat`` (natural scale)."""

    n_coef = eta_hat.n_coef
    pmap = ParameterMap(EtaParams.kinds(n_coef), fixed)

    def contrib(natural: np.ndarray, v: np.ndarray) -> np.ndarray:
        eta = EtaParams.from_vector(natural, n_coef)
        return contributions(eta, data.y, data.delta, data.xi, data.x, data.z, v)

    return sandwich(
        contrib,
        eta_hat.to_vector(),
        pmap,
        first_stage_result,
        lambda gamma: first_stage_result.control_at(data, gamma),
        fd_step,
    )


def fit(
    data: Dataset,
    first_stage: FirstStageSpec,
    cfg: FitConfig = FitConfig(),
    *,
    first_stage_result: Optional[FirstStageResult] = None,
    start: Optional[EtaParams] = None,
) -> FitResult:
    """Fit the model in the requested variant."""

    _check_events(data, cfg.min_events)
    fs = _control_stage(data, first_stage, cfg, first_stage_result)
    work = data.with_control(fs.v_hat)
    n_coef = data.x.shape[1]
    kinds = EtaParams.kinds(n_coef)
    pmap = ParameterMap(kinds, _fixed_slots(cfg, n_coef))

    def loglik(natural: np.ndarray) -> float:
        return sample_loglik(EtaParams.from_vector(natural, n_coef), work)

    if start is not None:
        first = start.to_vector()
        for idx, value in pmap.fixed.items():
            first[idx] = value
        starts = [first]
    else:
        crude = _crude_start(work, cfg)
        indep_map = ParameterMap(kinds, _fixed_slots(cfg, n_coef, independent=True))
        first = maximize(loglik, crude, indep_map, cfg).natural
        starts = [first] + _jittered(first, n_coef, cfg, pmap)[: cfg.n_starts - 1]

    best, diagnostics = best_of(loglik, starts, pmap, cfg)
    eta_hat = EtaParams.from_vector(best.natural, n_coef)
    names = EtaParams.names(data.covariate_names)
    LOGGER.info(
        "Fitted %s model on %d records: loglik=%.6f after %d iterations (%d starts)",
        cfg.variant.value,
        data.n,
        best.loglik,
        best.n_iter,
        len(starts),
    )

    vcov = ci = None
    if cfg.compute_vcov:
        try:
            vcov = sandwich_vcov(work, fs, eta_hat, fixed=pmap.fixed, fd_step=cfg.fd_step)
            ci = confidence_intervals(eta_hat, vcov, cfg.level, kinds=kinds, free=pmap.free, names=names)
        except InferenceError as exc:
            LOGGER.warning("Variance estimation failed: %s", exc)
            vcov = ci = None

    return FitResult(
        eta_hat=eta_hat,
        gamma_hat=np.asarray(fs.gamma_hat if cfg.variant in _ESTIMATED_CONTROL else [], dtype=float),
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
        level=cfg.level,
        first_stage=fs,
        starts=diagnostics,
        config=cfg,
    )


def predict_survival(fit_result: FitResult, times, x, z: float, v: float, margin: str = "T") -> np.ndarray:
    """Model-implied marginal survival ``P(T > t)`` (or ``C``) at one covariate profile.

    ``times`` are on the log scale of ``Y``; ``x`` includes the intercept.
    """

    eta = fit_result.eta_hat
    x = np.asarray(x, dtype=float)
    if margin == "T":
        tau = x @ eta.beta_t + z * eta.alpha_t + v * eta.lambda_t
        theta, sigma = eta.theta1, eta.sigma_t
    elif margin == "C":
        tau = x @ eta.beta_c + z * eta.alpha_c + v * eta.lambda_c
        theta, sigma = eta.theta2, eta.sigma_c
    else:
        raise DomainError("margin must be 'T' or 'C'")
    lam = np.asarray(yeo_johnson(theta, np.asarray(times, dtype=float)))
    return 1.0 - norm_cdf((lam - tau) / sigma)


__all__ = [
    "FitConfig",
    "FitResult",
    "FitVariant",
    "Optimum",
    "ParameterMap",
    "best_of",
    "confidence_intervals",
    "fd_gradient",
    "fd_hessian",
    "fit",
    "maximize",
    "predict_survival",
    "sandwich",
    "sandwich_vcov",
    "score_rows",
    "wald_table",
]
