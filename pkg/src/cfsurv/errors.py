"""Exception hierarchy shared by the estimation modules."""
from __future__ import annotations

from typing import Any, Mapping, Optional

import numpy as np


class CfsurvError(Exception):
    """Base class for all library errors."""


class DomainError(CfsurvError, ValueError):
    """An argument lies outside the domain of a function."""


class UnsupportedDimensionError(DomainError):
    """Multivariate normal tail requested for more than three dimensions."""


class ValidationError(CfsurvError, ValueError):
    """Input data or configuration fails a sanity check."""


class EstimationError(CfsurvError):
    """The estimating equations cannot be solved (e.g. rank-deficient design)."""


class ConvergenceError(EstimationError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(
        self,
        message: str,
        last_iterate: Optional[np.ndarray] = None,
        diagnostics: Optional[Mapping[str, Any]] = None,
    ) -> None:
        super().__init__(message)
        self.last_iterate = None if last_iterate is None else np.asarray(last_iterate, dtype=float)
        self.diagnostics = dict(diagnostics or {})


class InferenceError(CfsurvError):
    """Variance estimation failed (singular Hessian or Jacobian)."""


class GofError(CfsurvError):
    """The bootstrap goodness-of-fit test could not be completed."""


class NumericError(CfsurvError):
    """A numerical integration did not reach the requested tolerance."""


__all__ = [
    "CfsurvError",
    "ConvergenceError",
    "DomainError",
    "EstimationError",
    "GofError",
    "InferenceError",
    "NumericError",
    "UnsupportedDimensionError",
    "ValidationError",
]
