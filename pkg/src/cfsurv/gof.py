"""Goodness of fit for the distribution of K = min(T, C).

The fitted model implies ``F_K``; the data give its Kaplan-Meier estimate
(administrative censoring acts as right censoring of K). Their weighted
Cramer-von Mises distance is compared with a parametric bootstrap of the
same statistic. The test is one-sided and slightly conservative: a rejection
signals a bad fit, a non-rejection does not certify a good one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import pandas as pd

from .data import Dataset
from .errors import DomainError, GofError, ValidationError
from .estimator import FitResult, fit
from .likelihood import EtaParams, cdf_min, subdensities
from .parallel import run_tasks
from .rng import bivariate_normal, stream, uniform
from .transform import yeo_johnson_inverse

LOGGER = logging.getLogger(__name__)

DEFAULT_B = 250
QUADRATURE_NODES = 512
MAX_FAILURE_SHARE = 0.10
# rows x grid points evaluated at once in the model cdf
_CHUNK = 2_000_000


@dataclass(frozen=True)
class KmCurve:
    """Product-limit estimate; ``surv[i]`` is the survival just after ``times[i]``."""

    times: np.ndarray
    surv: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def survival(self, t) -> np.ndarray | float:
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t_arr, side="right") - 1
        out = np.where(idx >= 0, self.surv[np.maximum(idx, 0)], 1.0)
        return float(out) if np.ndim(t) == 0 else out

    def cdf(self, t) -> np.ndarray | float:
        out = 1.0 - np.asarray(self.survival(t))
        return float(out) if np.ndim(t) == 0 else out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"time": self.times, "at_risk": self.at_risk, "events": self.events, "surv": self.surv}
        )


@dataclass(frozen=True)
class GofResult:
    t_cm: float
    boot_stats: np.ndarray
    p_value: float
    reject_at: dict[float, bool]
    critical_values: dict[float, float] = field(default_factory=dict)
    n_failed: int = 0
    seed: int = 0

    @property
    def B(self) -> int:
        return int(self.boot_stats.shape[0])

    def to_dict(self) -> dict:
        return {
            "t_cm": self.t_cm,
            "p_value": self.p_value,
            "B": self.B,
            "n_failed": self.n_failed,
            "seed": self.seed,
            "reject_at": {str(k): v for k, v in self.reject_at.items()},
            "critical_values": {str(k): v for k, v in self.critical_values.items()},
        }


def kaplan_meier(times, event_flags) -> KmCurve:
    """Kaplan-Meier estimator; tied times are grouped."""

    t = np.asarray(times, dtype=float)
    d = np.asarray(event_flags)
    if t.size == 0:
        raise DomainError("kaplan_meier needs at least one observation")
    if t.shape != d.shape:
        raise DomainError("times and event_flags must have equal length")
    if not np.all(np.isin(d, (0, 1))):
        raise DomainError("event flags must be 0 or 1")

    uniq, inverse = np.unique(t, return_inverse=True)
    n_events = np.bincount(inverse, weights=d.astype(float))
    n_total = np.bincount(inverse).astype(float)
    at_risk = t.size - np.concatenate([[0.0], np.cumsum(n_total)[:-1]])
    surv = np.cumprod(1.0 - n_events / at_risk)
    return KmCurve(times=uniq, surv=np.clip(surv, 0.0, 1.0), at_risk=at_risk, events=n_events)


def _grid_average(func: Callable[[np.ndarray], np.ndarray], k: np.ndarray, n_rows: int) -> np.ndarray:
    step = max(1, _CHUNK // max(n_rows, 1))
    parts = [func(k[i : i + step]).mean(axis=1) for i in range(0, k.size, step)]
    return np.concatenate(parts)


def model_cdf_K(k, eta: EtaParams, data: Dataset):
    """Sample-averaged model distribution function of ``min(T, C)``; 0 at ``-inf`` and 1 at ``+inf``."""

    if data.v is None:
        raise ValidationError("dataset has no control values")
    grid = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(np.isnan(grid)):
        raise DomainError("k must not be NaN")
    out = (grid > 0).astype(float)
    finite = np.isfinite(grid)
    if finite.any():
        out[finite] = _grid_average(lambda g: cdf_min(eta, g, data.x, data.z, data.v), grid[finite], data.n)
    return float(out[0]) if np.ndim(k) == 0 else out


def model_density_K(k, eta: EtaParams, data: Dataset):
    """Sample-averaged density of ``min(T, C)`` (sum of the two sub-densities)."""

    if data.v is None:
        raise ValidationError("dataset has no control values")
    grid = np.atleast_1d(np.asarray(k, dtype=float))

    def density(g: np.ndarray) -> np.ndarray:
        f_t, f_c = subdensities(eta, g, data.x, data.z, data.v)
        return f_t + f_c

    out = _grid_average(density, grid, data.n)
    return float(out[0]) if np.ndim(k) == 0 else out


def integration_bounds(y: np.ndarray, margin: float = 0.03) -> tuple[float, float]:
    lo, hi = float(np.min(y)), float(np.max(y))
    spread = hi - lo
    return lo - margin * spread, hi + margin * spread


def cvm_statistic(
    model_cdf: Callable[[np.ndarray], np.ndarray],
    km_cdf: Callable[[np.ndarray], np.ndarray],
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    n: int = 1,
    *,
    density: Callable[[np.ndarray], np.ndarray],
    bounds: tuple[float, float],
    nodes: int = QUADRATURE_NODES,
) -> float:
    """``n * int (F_model - F_km)^2 w dF_model`` by Gauss-Legendre quadrature."""

    lo, hi = bounds
    if not hi > lo:
        raise DomainError("integration bounds must satisfy upper > lower")
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (hi - lo)
    k = lo + half * (x + 1.0)
    diff = np.asarray(model_cdf(k)) - np.asarray(km_cdf(k))
    wk = np.ones_like(k) if weight is None else np.asarray(weight(k), dtype=float)
    return float(n * half * np.sum(w * diff * diff * wk * np.asarray(density(k))))


def fit_statistic(data: Dataset, eta: EtaParams, nodes: int = QUADRATURE_NODES) -> float:
    """Cramer-von Mises distance between the fitted and Kaplan-Meier cdf of K."""

    km = kaplan_meier(data.y, data.delta + data.xi)
    return cvm_statistic(
        lambda g: model_cdf_K(g, eta, data),
        km.cdf,
        None,
        data.n,
        density=lambda g: model_density_K(g, eta, data),
        bounds=integration_bounds(data.y),
        nodes=nodes,
    )


def sample_admin(km_a: KmCurve, u: np.ndarray) -> np.ndarray:
    """Inverse-transform draws from the Kaplan-Meier estimate of the admin law.

    Draws beyond the last jump of the estimated cdf are ``+inf``.
    """

    cdf = 1.0 - km_a.surv
    idx = np.searchsorted(cdf, u, side="left")
    out = np.full(u.shape, np.inf)
    inside = idx < cdf.size
    out[inside] = km_a.times[idx[inside]]
    return out


def simulate_from_fit(data: Dataset, eta: EtaParams, km_a: KmCurve, rng: np.random.Generator) -> Dataset:
    """Draw ``(Y, Delta, xi)`` from the fitted model at the observed covariates."""

    cov = np.array(
        [
            [eta.sigma_t**2, eta.rho * eta.sigma_t * eta.sigma_c],
            [eta.rho * eta.sigma_t * eta.sigma_c, eta.sigma_c**2],
        ]
    )
    eps = bivariate_normal(rng, cov, data.n)
    tau_t = data.x @ eta.beta_t + data.z * eta.alpha_t + data.v * eta.lambda_t
    tau_c = data.x @ eta.beta_c + data.z * eta.alpha_c + data.v * eta.lambda_c
    t = np.asarray(yeo_johnson_inverse(eta.theta1, tau_t + eps[:, 0]))
    c = np.asarray(yeo_johnson_inverse(eta.theta2, tau_c + eps[:, 1]))
    a = sample_admin(km_a, uniform(rng, data.n))
    y = np.minimum(np.minimum(t, c), a)
    delta = ((t <= c) & (t <= a)).astype(int)
    xi = ((c < t) & (c <= a)).astype(int)
    return Dataset(
        y=y,
        delta=delta,
        xi=xi,
        x=data.x,
        w_tilde=data.w_tilde,
        z=data.z,
        v=data.v,
        covariate_names=data.covariate_names,
    )


def _bootstrap_task(args) -> float:
    data, fitted, km_a, seed, b, nodes = args
    boot = simulate_from_fit(data, fitted.eta_hat, km_a, stream(seed, b))
    cfg = replace(fitted.config, n_starts=1, compute_vcov=False)
    refit = fit(
        boot,
        fitted.first_stage.spec,
        cfg,
        first_stage_result=fitted.first_stage,
        start=fitted.eta_hat,
    )
    return fit_statistic(boot, refit.eta_hat, nodes)


def bootstrap_gof(
    data: Dataset,
    fitted: FitResult,
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    threads: int = 1,
    levels: Sequence[float] = (0.05, 0.10),
    nodes: int = QUADRATURE_NODES,
) -> GofResult:
    """Parametric bootstrap test of the fitted model."""

    if B < 100:
        raise DomainError("the bootstrap test needs B >= 100")
    if not fitted.converged or fitted.first_stage is None or fitted.config is None:
        raise GofError("bootstrap_gof needs a converged fit carrying its first stage and config")

    work = data.with_control(fitted.first_stage.v_hat)
    t_cm = fit_statistic(work, fitted.eta_hat, nodes)
    km_a = kaplan_meier(work.y, work.admin)
    LOGGER.info("Observed Cramer-von Mises statistic %.6f; running %d bootstrap refits", t_cm, B)

    tasks = [(work, fitted, km_a, seed, b, nodes) for b in range(B)]
    outcomes = run_tasks(_bootstrap_task, tasks, threads=threads, desc="bootstrap")
    stats = np.array([o.value for o in outcomes if o.ok], dtype=float)
    n_failed = B - stats.size
    if n_failed > MAX_FAILURE_SHARE * B:
        raise GofError(f"{n_failed} of {B} bootstrap refits failed")
    if n_failed:
        LOGGER.warning("%d of %d bootstrap refits failed and were skipped", n_failed, B)

    p_value = (1.0 + np.count_nonzero(stats >= t_cm)) / (stats.size + 1.0)
    ordered = np.sort(stats)
    critical = {float(k): float(np.quantile(ordered, 1.0 - k)) for k in levels}
    reject = {k: bool(t_cm > c) for k, c in critical.items()}
    LOGGER.info("Bootstrap p-value %.4f", p_value)
    return GofResult(
        t_cm=t_cm,
        boot_stats=stats,
        p_value=float(p_value),
        reject_at=reject,
        critical_values=critical,
        n_failed=int(n_failed),
        seed=int(seed),
    )


__all__ = [
    "DEFAULT_B",
    "GofResult",
    "KmCurve",
    "bootstrap_gof",
    "cvm_statistic",
    "fit_statistic",
    "integration_bounds",
    "kaplan_meier",
    "model_cdf_K",
    "model_density_K",
    "sample_admin",
    "simulate_from_fit",
]
