"""Log-likelihood of the bivariate transformed-normal model for (T, C).

On the transformed scale ``Lambda_theta1(T) = tau_T + eps_T`` and
``Lambda_theta2(C) = tau_C + eps_C`` with ``(eps_T, eps_C)`` bivariate
normal. An observation contributes the density of the observed event
times the conditional survival of the other latent time, or the joint
survival when it is administratively censored. The factors coming from the
administrative censoring law do not involve the parameters and are left out
unless explicitly requested.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .data import Dataset, ObservedRecord
from .dist import bvn_cdf, bvn_tail, norm_cdf, norm_logpdf
from .errors import DomainError, ValidationError
from .transform import check_theta, yeo_johnson, yeo_johnson_log_deriv

LOGGER = logging.getLogger(__name__)

LOG_FLOOR = math.log(1e-300)
# |rho| is capped here while evaluating; fits near the boundary stay finite.
RHO_EVAL_MAX = 1.0 - 1e-6

SCALAR_FIELDS = (
    "alpha_t",
    "lambda_t",
    "alpha_c",
    "lambda_c",
    "sigma_t",
    "sigma_c",
    "rho",
    "theta1",
    "theta2",
)


@dataclass(frozen=True)
class EtaParams:
    """Second-stage parameters.

    Vector layout (see :meth:`to_vector`): ``beta_t``, ``alpha_t``,
    ``lambda_t``, ``beta_c``, ``alpha_c``, ``lambda_c``, ``sigma_t``,
    ``sigma_c``, ``rho``, ``theta1``, ``theta2``.
    """

    beta_t: np.ndarray
    alpha_t: float
    lambda_t: float
    beta_c: np.ndarray
    alpha_c: float
    lambda_c: float
    sigma_t: float
    sigma_c: float
    rho: float
    theta1: float = 1.0
    theta2: float = 1.0

    def __post_init__(self) -> None:
        beta_t = np.atleast_1d(np.asarray(self.beta_t, dtype=float))
        beta_c = np.atleast_1d(np.asarray(self.beta_c, dtype=float))
        if beta_t.shape != beta_c.shape:
            raise DomainError("beta_t and beta_c must have the same length")
        object.__setattr__(self, "beta_t", beta_t)
        object.__setattr__(self, "beta_c", beta_c)
        for name in SCALAR_FIELDS:
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.sigma_t > 0 and self.sigma_c > 0):
            raise DomainError("sigma_t and sigma_c must be positive")
        if not abs(self.rho) < 1.0:
            raise DomainError("rho must lie strictly inside (-1, 1)")
        check_theta(self.theta1)
        check_theta(self.theta2)

    @property
    def n_coef(self) -> int:
        return int(self.beta_t.shape[0])

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.beta_t,
                [self.alpha_t, self.lambda_t],
                self.beta_c,
                [self.alpha_c, self.lambda_c],
                [self.sigma_t, self.sigma_c, self.rho, self.theta1, self.theta2],
            ]
        )

    @classmethod
    def from_vector(cls, vector: Sequence[float] | np.ndarray, n_coef: int) -> "EtaParams":
        vec = np.asarray(vector, dtype=float)
        if vec.shape != (2 * n_coef + 9,):
            raise DomainError(f"expected a vector of length {2 * n_coef + 9}, got {vec.shape}")
        m = n_coef
        return cls(
            beta_t=vec[:m],
            alpha_t=vec[m],
            lambda_t=vec[m + 1],
            beta_c=vec[m + 2 : 2 * m + 2],
            alpha_c=vec[2 * m + 2],
            lambda_c=vec[2 * m + 3],
            sigma_t=vec[2 * m + 4],
            sigma_c=vec[2 * m + 5],
            rho=vec[2 * m + 6],
            theta1=vec[2 * m + 7],
            theta2=vec[2 * m + 8],
        )

    @staticmethod
    def names(covariate_names: Sequence[str]) -> list[str]:
        out = [f"beta_T[{c}]" for c in covariate_names] + ["alpha_T", "lambda_T"]
        out += [f"beta_C[{c}]" for c in covariate_names] + ["alpha_C", "lambda_C"]
        return out + ["sigma_T", "sigma_C", "rho", "theta1", "theta2"]

    @staticmethod
    def kinds(n_coef: int) -> list[str]:
        """Parameter kind per vector slot: ``coef``, ``scale``, ``corr`` or ``theta``."""

        block = ["coef"] * (n_coef + 2)
        return block + block + ["scale", "scale", "corr", "theta", "theta"]

    def swapped(self) -> "EtaParams":
        """Exchange the roles of T and C."""

        return EtaParams(
            beta_t=self.beta_c,
            alpha_t=self.alpha_c,
            lambda_t=self.lambda_c,
            beta_c=self.beta_t,
            alpha_c=self.alpha_t,
            lambda_c=self.lambda_t,
            sigma_t=self.sigma_c,
            sigma_c=self.sigma_t,
            rho=self.rho,
            theta1=self.theta2,
            theta2=self.theta1,
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _taus(eta: EtaParams, x: np.ndarray, z: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tau_t = x @ eta.beta_t + z * eta.alpha_t + v * eta.lambda_t
    tau_c = x @ eta.beta_c + z * eta.alpha_c + v * eta.lambda_c
    return tau_t, tau_c


def linear_predictors_arrays(eta: EtaParams, y, x, z, v):
    """Vectorised ``(tau_T, tau_C, b_T, b_C)`` for column arrays."""

    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != eta.n_coef:
        raise ValidationError(f"x has {x.shape[1]} columns, parameters expect {eta.n_coef}")
    tau_t, tau_c = _taus(eta, x, np.asarray(z, dtype=float), np.asarray(v, dtype=float))
    b_t = np.asarray(yeo_johnson(eta.theta1, y)) - tau_t
    b_c = np.asarray(yeo_johnson(eta.theta2, y)) - tau_c
    return tau_t, tau_c, b_t, b_c


def linear_predictors(eta: EtaParams, rec: ObservedRecord) -> tuple[float, float, float, float]:
    """``(tau_T, tau_C, b_T, b_C)`` of one record with a control value."""

    if rec.v is None:
        raise ValidationError("record has no control value")
    out = linear_predictors_arrays(eta, np.atleast_1d(rec.y), rec.x[None, :], np.atleast_1d(rec.z), np.atleast_1d(rec.v))
    return tuple(float(a[0]) for a in out)


def _log_event_term(b_own, s_own, b_other, s_other, rho, log_jac):
    """log of ``(1/s_own) phi(b_own/s_own) Lambda'(y) P(other > y | own)``."""

    cond = (b_other - rho * (s_other / s_own) * b_own) / (s_other * math.sqrt(1.0 - rho * rho))
    log_surv = np.maximum(special.log_ndtr(-cond), LOG_FLOOR)
    return -math.log(s_own) + norm_logpdf(b_own / s_own) + log_jac + log_surv


def contributions(
    eta: EtaParams,
    y,
    delta,
    xi,
    x,
    z,
    v,
    *,
    include_admin: bool = False,
    admin_law=None,
) -> np.ndarray:
    """Per-observation log-likelihood contributions."""

    y = np.asarray(y, dtype=float)
    delta = np.asarray(delta)
    xi = np.asarray(xi)
    rho = float(np.clip(eta.rho, -RHO_EVAL_MAX, RHO_EVAL_MAX))
    _, _, b_t, b_c = linear_predictors_arrays(eta, y, x, z, v)
    st, sc = eta.sigma_t, eta.sigma_c

    out = np.empty_like(y)
    is_t = delta == 1
    is_c = xi == 1
    is_a = ~(is_t | is_c)
    if np.any(is_t):
        out[is_t] = _log_event_term(
            b_t[is_t], st, b_c[is_t], sc, rho, np.asarray(yeo_johnson_log_deriv(eta.theta1, y[is_t]))
        )
    if np.any(is_c):
        out[is_c] = _log_event_term(
            b_c[is_c], sc, b_t[is_c], st, rho, np.asarray(yeo_johnson_log_deriv(eta.theta2, y[is_c]))
        )
    if np.any(is_a):
        joint = np.asarray(bvn_tail(b_t[is_a] / st, b_c[is_a] / sc, rho))
        out[is_a] = np.log(np.maximum(joint, 1e-300))

    if include_admin:
        if admin_law is None:
            raise ValidationError("include_admin requires the law of the administrative censoring time")
        sf = np.maximum(admin_law.sf(y), 1e-300)
        pdf = np.maximum(admin_law.pdf(y), 1e-300)
        out = out + np.where(is_a, np.log(pdf), np.log(sf))

    return np.where(np.isnan(out), -np.inf, out)


def loglik_contribution(
    eta: EtaParams,
    rec: ObservedRecord,
    include_admin: bool = False,
    admin_law=None,
) -> float:
    """Log-likelihood contribution of one record."""

    if rec.v is None:
        raise ValidationError("record has no control value")
    value = contributions(
        eta,
        np.atleast_1d(rec.y),
        np.atleast_1d(rec.delta),
        np.atleast_1d(rec.xi),
        rec.x[None, :],
        np.atleast_1d(rec.z),
        np.atleast_1d(rec.v),
        include_admin=include_admin,
        admin_law=admin_law,
    )
    return float(value[0])


def data_contributions(eta: EtaParams, data: Dataset, **kwargs) -> np.ndarray:
    if data.v is None:
        raise ValidationError("dataset has no control values; fit the first stage first")
    return contributions(eta, data.y, data.delta, data.xi, data.x, data.z, data.v, **kwargs)


def sample_loglik(eta: EtaParams, data: Dataset, **kwargs) -> float:
    """Average log-likelihood over the sample.

    ``math.fsum`` gives a correctly rounded sum, so the value does not depend
    on record order.
    """

    contrib = data_contributions(eta, data, **kwargs)
    if not np.all(np.isfinite(contrib)):
        return -math.inf
    return math.fsum(contrib.tolist()) / data.n


def subdensities(eta: EtaParams, y, x, z, v) -> tuple[np.ndarray, np.ndarray]:
    """Sub-densities of ``(Y, Delta=1)`` and ``(Y, xi=1)`` without administrative censoring.

    ``y`` has shape ``(G,)`` and the covariate arrays ``n`` rows; results are
    ``(G, n)``.
    """

    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    rho = float(np.clip(eta.rho, -RHO_EVAL_MAX, RHO_EVAL_MAX))
    tau_t, tau_c = _taus(eta, x, z, v)
    lam_t = np.asarray(yeo_johnson(eta.theta1, y))[:, None]
    lam_c = np.asarray(yeo_johnson(eta.theta2, y))[:, None]
    b_t = lam_t - tau_t[None, :]
    b_c = lam_c - tau_c[None, :]
    jac_t = np.asarray(yeo_johnson_log_deriv(eta.theta1, y))[:, None]
    jac_c = np.asarray(yeo_johnson_log_deriv(eta.theta2, y))[:, None]
    f_t = np.exp(_log_event_term(b_t, eta.sigma_t, b_c, eta.sigma_c, rho, jac_t))
    f_c = np.exp(_log_event_term(b_c, eta.sigma_c, b_t, eta.sigma_t, rho, jac_c))
    return f_t, f_c


def cdf_min(eta: EtaParams, k, x, z, v) -> np.ndarray:
    """``P(min(T, C) <= k)`` per grid point and covariate row, shape ``(G, n)``."""

    k = np.atleast_1d(np.asarray(k, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho = float(np.clip(eta.rho, -RHO_EVAL_MAX, RHO_EVAL_MAX))
    tau_t, tau_c = _taus(eta, x, np.asarray(z, dtype=float), np.asarray(v, dtype=float))
    u_t = (np.asarray(yeo_johnson(eta.theta1, k))[:, None] - tau_t[None, :]) / eta.sigma_t
    u_c = (np.asarray(yeo_johnson(eta.theta2, k))[:, None] - tau_c[None, :]) / eta.sigma_c
    joint = np.asarray(bvn_cdf(u_t, u_c, rho)).reshape(u_t.shape)
    return np.clip(norm_cdf(u_t) + norm_cdf(u_c) - joint, 0.0, 1.0)


__all__ = [
    "EtaParams",
    "LOG_FLOOR",
    "RHO_EVAL_MAX",
    "cdf_min",
    "contributions",
    "data_contributions",
    "linear_predictors",
    "linear_predictors_arrays",
    "loglik_contribution",
    "sample_loglik",
    "subdensities",
]
