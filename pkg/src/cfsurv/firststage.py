"""First-stage models for the endogenous regressor and the control function.

The continuous kind regresses ``Z`` on ``W = (1, X~, W~)`` by least squares
and uses the residual as control value. The binary kinds fit the choice model
``Z = 1(W'gamma > nu)`` by maximum likelihood and use
``V = Z E[nu | nu < W'gamma] + (1 - Z) E[nu | nu > W'gamma]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import statsmodels.api as sm
from scipy import special

from .data import Dataset
from .errors import ConvergenceError, EstimationError, InferenceError, ValidationError

LOGGER = logging.getLogger(__name__)

NEWTON_GTOL = 1e-9
NEWTON_MAX_ITER = 200
MAX_HALVINGS = 40


class FirstStageKind(str, Enum):
    CONTINUOUS_LINEAR = "continuous-linear"
    BINARY_LOGIT = "binary-logit"
    BINARY_PROBIT = "binary-probit"
    BINARY_ONE_SIDED_LOGIT = "binary-one-sided-logit"

    @property
    def is_binary(self) -> bool:
        return self is not FirstStageKind.CONTINUOUS_LINEAR


@dataclass(frozen=True)
class FirstStageSpec:
    """Which first-stage model to fit and which columns of ``(1, X~, W~)`` enter it.

    ``columns=None`` uses every column, except for the one-sided kind whose
    index never contains the instrument (it only selects the subgroup).
    """

    kind: FirstStageKind = FirstStageKind.BINARY_LOGIT
    columns: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FirstStageKind(self.kind))
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    @classmethod
    def from_mapping(cls, settings: Mapping[str, Any] | None) -> "FirstStageSpec":
        settings = dict(settings or {})
        kind = settings.get("kind", FirstStageKind.BINARY_LOGIT.value)
        columns = settings.get("columns")
        return cls(kind=FirstStageKind(kind), columns=None if columns is None else tuple(columns))

    def resolve_columns(self, n_columns: int) -> tuple[int, ...]:
        if self.columns is None:
            last = n_columns - 1 if self.kind is FirstStageKind.BINARY_ONE_SIDED_LOGIT else n_columns
            return tuple(range(last))
        if any(c < 0 or c >= n_columns for c in self.columns):
            raise ValidationError(f"first-stage columns {self.columns} out of range for {n_columns} columns")
        if self.kind is FirstStageKind.BINARY_ONE_SIDED_LOGIT and n_columns - 1 in self.columns:
            raise ValidationError("the one-sided first stage must not include the instrument in its index")
        return self.columns


@dataclass(frozen=True)
class FirstStageResult:
    """Fitted first stage.

    ``score_rows`` holds the per-observation estimating functions ``h_m`` at
    ``gamma_hat`` and ``m_hat`` the Jacobian of their mean.
    """

    spec: FirstStageSpec
    gamma_hat: np.ndarray
    v_hat: np.ndarray
    score_rows: np.ndarray
    m_hat: np.ndarray
    n_iter: int = 0
    loglik: Optional[float] = None
    columns: tuple[int, ...] = field(default=())

    def influence(self) -> np.ndarray:
        """Rows ``Psi_i = -M^{-1} h_m(W_i, Z_i, gamma_hat)``."""

        try:
            m_inv = np.linalg.inv(self.m_hat)
        except np.linalg.LinAlgError as exc:
            raise InferenceError("first-stage Jacobian is singular") from exc
        return -self.score_rows @ m_inv.T

    def control_at(self, data: Dataset, gamma: np.ndarray) -> np.ndarray:
        """Control values for ``data`` evaluated at an arbitrary ``gamma``."""

        return control_values(self.spec, gamma, data.w, data.z)


def _softplus(c: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, c)


def _logistic_upper_mean(c: np.ndarray) -> np.ndarray:
    """``E[nu | nu > c]`` for a standard logistic ``nu``.

    Equals ``(1 + e^c) log(1 + e^c) - c e^c``, rearranged as
    ``softplus(c) + log1p(u) / u`` with ``u = e^{-c}``.
    """

    u = np.exp(-np.maximum(c, -700.0))
    ratio = np.where(u > 1e-12, np.log1p(u) / np.where(u > 1e-12, u, 1.0), 1.0 - 0.5 * u)
    return _softplus(c) + ratio


def logistic_control(index, z):
    """Control value under a logistic ``nu`` for linear index ``W'gamma``."""

    c = np.asarray(index, dtype=float)
    zz = np.asarray(z, dtype=float)
    return np.where(zz > 0.5, -_logistic_upper_mean(-c), _logistic_upper_mean(c))


def probit_control(index, z):
    """Inverse-Mills control value under a standard normal ``nu``."""

    c = np.asarray(index, dtype=float)
    zz = np.asarray(z, dtype=float)
    log_phi = -0.5 * c * c - 0.5 * np.log(2.0 * np.pi)
    lower = -np.exp(log_phi - special.log_ndtr(c))
    upper = np.exp(log_phi - special.log_ndtr(-c))
    return np.where(zz > 0.5, lower, upper)


def control_values(spec: FirstStageSpec, gamma, w, z) -> np.ndarray:
    """Vectorised control function for full design rows ``w = (1, X~, W~)``."""

    w_full = np.atleast_2d(np.asarray(w, dtype=float))
    cols = spec.resolve_columns(w_full.shape[1])
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(gamma)):
        raise ValidationError("gamma must be finite")
    if gamma.shape != (len(cols),):
        raise ValidationError(f"gamma has length {gamma.shape[0]}, expected {len(cols)}")
    index = w_full[:, cols] @ gamma
    z = np.asarray(z, dtype=float)
    if spec.kind is FirstStageKind.CONTINUOUS_LINEAR:
        return z - index
    if spec.kind is FirstStageKind.BINARY_PROBIT:
        return probit_control(index, z)
    return logistic_control(index, z)


def control_value(spec: FirstStageSpec, gamma, w, z: float) -> float:
    """Control value of a single subject."""

    if not (np.all(np.isfinite(np.asarray(w, dtype=float))) and np.isfinite(z)):
        raise ValidationError("w and z must be finite")
    return float(control_values(spec, gamma, np.atleast_2d(w), np.atleast_1d(z))[0])


def _check_rank(design: np.ndarray) -> None:
    n, p = design.shape
    if n <= p:
        raise EstimationError(f"first stage needs more than {p} observations, got {n}")
    rank = np.linalg.matrix_rank(design)
    if rank < p:
        raise EstimationError(f"first-stage design is rank deficient (rank {rank} < {p})")


def _newton(model, p: int) -> tuple[np.ndarray, int, float]:
    """Damped Newton ascent on a statsmodels discrete-choice log-likelihood."""

    nobs = float(model.endog.shape[0])
    params = np.zeros(p)
    current = model.loglike(params)
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        grad = model.score(params)
        if np.max(np.abs(grad)) / nobs < NEWTON_GTOL:
            return params, iteration - 1, float(current)
        hess = model.hessian(params)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                "singular Hessian in first-stage Newton iterations",
                last_iterate=params,
                diagnostics={"iteration": iteration},
            ) from exc
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = params - scale * step
            value = model.loglike(candidate)
            if np.isfinite(value) and value >= current:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                "step halving failed in first-stage Newton iterations",
                last_iterate=params,
                diagnostics={"iteration": iteration, "gradient": grad},
            )
        params, current = candidate, value
    grad = model.score(params)
    if np.max(np.abs(grad)) / nobs < NEWTON_GTOL:
        return params, NEWTON_MAX_ITER, float(current)
    raise ConvergenceError(
        f"first-stage maximum likelihood did not converge in {NEWTON_MAX_ITER} iterations",
        last_iterate=params,
        diagnostics={"gradient_inf_norm": float(np.max(np.abs(grad)) / nobs)},
    )


def _check_binary(z: np.ndarray) -> None:
    if not np.all(np.isin(z, (0.0, 1.0))):
        raise ValidationError("binary first stages require Z in {0, 1}")
    if z.min() == z.max():
        raise EstimationError("Z does not vary; the binary first stage is not identified")


def fit_first_stage(data: Dataset, spec: FirstStageSpec) -> FirstStageResult:
    """Estimate ``gamma`` and the control values ``V_hat``."""

    w_full = data.w
    cols = spec.resolve_columns(w_full.shape[1])
    design = w_full[:, cols]
    z = data.z
    n = data.n

    if spec.kind is FirstStageKind.CONTINUOUS_LINEAR:
        _check_rank(design)
        ols = sm.OLS(z, design).fit()
        gamma = np.asarray(ols.params, dtype=float)
        resid = z - design @ gamma
        score_rows = design * resid[:, None]
        m_hat = -(design.T @ design) / n
        LOGGER.info("First stage (OLS) fitted on %d rows, R^2=%.4f", n, float(ols.rsquared))
        return FirstStageResult(
            spec=spec,
            gamma_hat=gamma,
            v_hat=resid,
            score_rows=score_rows,
            m_hat=m_hat,
            columns=cols,
        )

    _check_binary(z)
    if spec.kind is FirstStageKind.BINARY_ONE_SIDED_LOGIT:
        if not np.all(np.isin(data.w_tilde, (0.0, 1.0))):
            raise ValidationError("the one-sided first stage requires a binary instrument")
        if np.any((data.w_tilde == 0) & (z == 1)):
            raise ValidationError("one-sided noncompliance requires Z = 0 whenever W~ = 0")
        subgroup = data.w_tilde == 1
        sub_design = design[subgroup]
        _check_rank(sub_design)
        model = sm.Logit(z[subgroup], sub_design)
        gamma, n_iter, loglik = _newton(model, sub_design.shape[1])
        score_rows = np.zeros((n, len(cols)))
        score_rows[subgroup] = model.score_obs(gamma)
        m_hat = model.hessian(gamma) / n
    else:
        _check_rank(design)
        model_cls = sm.Probit if spec.kind is FirstStageKind.BINARY_PROBIT else sm.Logit
        model = model_cls(z, design)
        gamma, n_iter, loglik = _newton(model, design.shape[1])
        score_rows = np.asarray(model.score_obs(gamma), dtype=float)
        m_hat = model.hessian(gamma) / n

    v_hat = control_values(spec, gamma, w_full, z)
    LOGGER.info(
        "First stage (%s) converged after %d Newton steps, gamma=%s",
        spec.kind.value,
        n_iter,
        np.array2string(gamma, precision=4),
    )
    return FirstStageResult(
        spec=spec,
        gamma_hat=gamma,
        v_hat=v_hat,
        score_rows=np.asarray(score_rows, dtype=float),
        m_hat=np.asarray(m_hat, dtype=float),
        n_iter=n_iter,
        loglik=loglik,
        columns=cols,
    )


def known_first_stage(data: Dataset, spec: FirstStageSpec, v: Sequence[float] | np.ndarray,
                      gamma: Optional[np.ndarray] = None) -> FirstStageResult:
    """Result for control values known exactly; the correction term vanishes."""

    cols = spec.resolve_columns(data.w.shape[1])
    p = len(cols)
    return FirstStageResult(
        spec=spec,
        gamma_hat=np.zeros(p) if gamma is None else np.asarray(gamma, dtype=float),
        v_hat=np.asarray(v, dtype=float),
        score_rows=np.zeros((data.n, p)),
        m_hat=-np.eye(p),
        columns=cols,
    )


__all__ = [
    "FirstStageKind",
    "FirstStageResult",
    "FirstStageSpec",
    "control_value",
    "control_values",
    "fit_first_stage",
    "known_first_stage",
    "logistic_control",
    "probit_control",
]
