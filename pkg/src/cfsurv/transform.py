"""Yeo-Johnson power transformation on the whole real line.

``yeo_johnson(theta, t)`` is the four-branch map

* ``t >= 0, theta != 0``: ``((t + 1)**theta - 1) / theta``
* ``t >= 0, theta == 0``: ``log(t + 1)``
* ``t < 0, theta != 2``:  ``-((1 - t)**(2 - theta) - 1) / (2 - theta)``
* ``t < 0, theta == 2``:  ``-log(1 - t)``

It is strictly increasing in ``t``, continuous in ``theta`` and onto the real
line for every ``theta`` in ``[0, 2]``. All functions accept scalars or numpy
arrays for ``t`` and return the same shape.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

THETA_MIN = 0.0
THETA_MAX = 2.0
# Below this distance from 0 or 2 the logarithmic branch is used.
BRANCH_EPS = 1e-12


def check_theta(theta: float) -> float:
    """Validate a transformation exponent and return it as a float."""

    value = float(theta)
    if not math.isfinite(value) or value < THETA_MIN or value > THETA_MAX:
        raise DomainError(f"theta must lie in [{THETA_MIN}, {THETA_MAX}], got {theta!r}")
    return value


def _as_finite(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _restore(out: np.ndarray, original):
    return float(out) if np.ndim(original) == 0 else out


def yeo_johnson(theta: float, t):
    """Evaluate the Yeo-Johnson transform at ``t``."""

    theta = check_theta(theta)
    x = _as_finite(t, "t")
    pos = x >= 0
    out = np.empty_like(x)

    lp = np.log1p(np.where(pos, x, 0.0))
    if abs(theta) < BRANCH_EPS:
        out_pos = lp
    else:
        # expm1 keeps ((t + 1)**theta - 1) / theta accurate for small theta * log1p(t)
        out_pos = np.expm1(theta * lp) / theta

    ln = np.log1p(np.where(pos, 0.0, -x))
    if abs(theta - 2.0) < BRANCH_EPS:
        out_neg = -ln
    else:
        out_neg = -np.expm1((2.0 - theta) * ln) / (2.0 - theta)

    out = np.where(pos, out_pos, out_neg)
    return _restore(out, t)


def yeo_johnson_log_deriv(theta: float, t):
    """Logarithm of the derivative ``d/dt yeo_johnson(theta, t)``."""

    theta = check_theta(theta)
    x = _as_finite(t, "t")
    out = np.where(
        x >= 0,
        (theta - 1.0) * np.log1p(np.abs(x)),
        (1.0 - theta) * np.log1p(np.abs(x)),
    )
    return _restore(out, t)


def yeo_johnson_deriv(theta: float, t):
    """Derivative ``(t + 1)**(theta - 1)`` for ``t >= 0``, ``(1 - t)**(1 - theta)`` otherwise."""

    out = np.exp(np.asarray(yeo_johnson_log_deriv(theta, t), dtype=float))
    return _restore(out, t)


def yeo_johnson_inverse(theta: float, s):
    """Closed-form inverse of :func:`yeo_johnson`.

    The map is a bijection of the real line for ``theta`` in ``[0, 2]``, so
    every finite ``s`` has a preimage; the sign of ``s`` selects the branch.
    """

    theta = check_theta(theta)
    y = _as_finite(s, "s")
    pos = y >= 0

    ypos = np.where(pos, y, 0.0)
    if abs(theta) < BRANCH_EPS:
        out_pos = np.expm1(ypos)
    else:
        out_pos = np.expm1(np.log1p(theta * ypos) / theta)

    yneg = np.where(pos, 0.0, y)
    if abs(theta - 2.0) < BRANCH_EPS:
        out_neg = -np.expm1(-yneg)
    else:
        out_neg = -np.expm1(np.log1p(-(2.0 - theta) * yneg) / (2.0 - theta))

    out = np.where(pos, out_pos, out_neg)
    return _restore(out, s)


__all__ = [
    "THETA_MAX",
    "THETA_MIN",
    "check_theta",
    "yeo_johnson",
    "yeo_johnson_deriv",
    "yeo_johnson_inverse",
    "yeo_johnson_log_deriv",
]
