"""Observed survival records and their column-oriented container."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ValidationError

LOGGER = logging.getLogger(__name__)

INTERCEPT = "intercept"


@dataclass(frozen=True)
class ObservedRecord:
    """One subject: log follow-up ``y``, indicators and covariates.

    ``x`` includes the leading intercept. ``v`` is the control value and is
    ``None`` until the first stage has been fitted.
    """

    y: float
    delta: int
    xi: int
    x: np.ndarray
    w_tilde: float
    z: float
    v: Optional[float] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.y):
            raise ValidationError("y must be finite")
        if self.delta not in (0, 1) or self.xi not in (0, 1) or self.delta + self.xi > 1:
            raise ValidationError("delta and xi must be bits with delta + xi <= 1")

    @property
    def admin(self) -> int:
        return 1 - self.delta - self.xi

    @property
    def w(self) -> np.ndarray:
        return np.append(self.x, self.w_tilde)


@dataclass
class Dataset:
    """Column-oriented collection of :class:`ObservedRecord`.

    ``x`` is the ``n x (m + 1)`` exogenous design including the intercept.
    ``truth`` is a side table of simulation-only columns (true control value
    ``v``, latent ``t``, ``c``, ``a``); estimators only read it in the oracle
    variant.
    """

    y: np.ndarray
    delta: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    w_tilde: np.ndarray
    z: np.ndarray
    v: Optional[np.ndarray] = None
    covariate_names: tuple[str, ...] = ()
    truth: Optional[pd.DataFrame] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float)
        self.delta = np.asarray(self.delta, dtype=int)
        self.xi = np.asarray(self.xi, dtype=int)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.w_tilde = np.asarray(self.w_tilde, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.v is not None:
            self.v = np.asarray(self.v, dtype=float)
        n = self.y.shape[0]
        if self.x.shape[0] != n:
            raise ValidationError("x must have one row per record")
        for name in ("delta", "xi", "w_tilde", "z") + (("v",) if self.v is not None else ()):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"{name} must have length {n}")
        if not np.all(np.isfinite(self.y)):
            raise ValidationError("y must be finite")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.z)) and np.all(np.isfinite(self.w_tilde))):
            raise ValidationError("covariates must be finite")
        if np.any((self.delta < 0) | (self.delta > 1) | (self.xi < 0) | (self.xi > 1)):
            raise ValidationError("delta and xi must be 0/1 indicators")
        if np.any(self.delta + self.xi > 1):
            raise ValidationError("delta + xi must not exceed 1")
        if not self.covariate_names:
            self.covariate_names = (INTERCEPT,) + tuple(f"x{j}" for j in range(1, self.x.shape[1]))
        if len(self.covariate_names) != self.x.shape[1]:
            raise ValidationError("covariate_names must match the columns of x")

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    @property
    def admin(self) -> np.ndarray:
        return 1 - self.delta - self.xi

    @property
    def w(self) -> np.ndarray:
        """First-stage design ``(1, X~, W~)``."""

        return np.column_stack([self.x, self.w_tilde])

    @property
    def has_admin_censoring(self) -> bool:
        return bool(np.any(self.admin == 1))

    def record(self, i: int) -> ObservedRecord:
        return ObservedRecord(
            y=float(self.y[i]),
            delta=int(self.delta[i]),
            xi=int(self.xi[i]),
            x=self.x[i].copy(),
            w_tilde=float(self.w_tilde[i]),
            z=float(self.z[i]),
            v=None if self.v is None else float(self.v[i]),
        )

    def records(self) -> Iterator[ObservedRecord]:
        for i in range(self.n):
            yield self.record(i)

    def with_control(self, v: np.ndarray) -> "Dataset":
        """Copy of the data carrying control values ``v``."""

        return replace(self, v=np.asarray(v, dtype=float).copy())

    def true_control(self) -> np.ndarray:
        if self.truth is None or "v" not in self.truth:
            raise ValidationError("the oracle variant needs a true control column 'v' in the truth table")
        return self.truth["v"].to_numpy(dtype=float)

    def subset(self, index: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(index)
        truth = None if self.truth is None else self.truth.iloc[idx].reset_index(drop=True)
        return Dataset(
            y=self.y[idx],
            delta=self.delta[idx],
            xi=self.xi[idx],
            x=self.x[idx],
            w_tilde=self.w_tilde[idx],
            z=self.z[idx],
            v=None if self.v is None else self.v[idx],
            covariate_names=self.covariate_names,
            truth=truth,
        )

    def to_frame(self, include_truth: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame({"y": self.y, "delta": self.delta, "xi": self.xi})
        for j, name in enumerate(self.covariate_names):
            if j == 0:
                continue
            frame[name] = self.x[:, j]
        frame["w_tilde"] = self.w_tilde
        frame["z"] = self.z
        if include_truth and self.truth is not None:
            for column in self.truth.columns:
                frame[f"true_{column}"] = self.truth[column].to_numpy()
        return frame

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        *,
        y: str = "y",
        delta: str = "delta",
        xi: str = "xi",
        z: str = "z",
        instrument: str = "w_tilde",
        covariates: Sequence[str] = (),
        truth_prefix: str = "true_",
    ) -> "Dataset":
        """Build a dataset from a cleaned frame; ``covariates`` excludes the intercept."""

        missing = {y, delta, xi, z, instrument, *covariates} - set(frame.columns)
        if missing:
            raise ValidationError(f"Missing required columns: {sorted(missing)}")
        n = len(frame)
        x = np.column_stack([np.ones(n)] + [frame[c].to_numpy(dtype=float) for c in covariates])
        truth_cols = [c for c in frame.columns if c.startswith(truth_prefix)]
        truth = None
        if truth_cols:
            truth = frame[truth_cols].rename(columns=lambda c: c[len(truth_prefix):]).reset_index(drop=True)
        return cls(
            y=frame[y].to_numpy(dtype=float),
            delta=frame[delta].to_numpy(dtype=int),
            xi=frame[xi].to_numpy(dtype=int),
            x=x,
            w_tilde=frame[instrument].to_numpy(dtype=float),
            z=frame[z].to_numpy(dtype=float),
            covariate_names=(INTERCEPT, *covariates),
            truth=truth,
        )

    def event_counts(self) -> dict[str, int]:
        return {
            "T": int(self.delta.sum()),
            "C": int(self.xi.sum()),
            "A": int(self.admin.sum()),
        }


__all__ = ["Dataset", "INTERCEPT", "ObservedRecord"]
