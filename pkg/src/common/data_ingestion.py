"""Shared data ingestion utilities."""

from __future__ import annotations

from typing import Iterable

import numpy as np
import pandas as pd

__all__ = ["normalise_columns", "normalise_label", "prepare_survival_frame"]


def normalise_label(label: str | None) -> str | None:
    if label is None:
        return None
    return str(label).strip().lower().replace(" ", "_")


def normalise_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """Return a copy of ``frame`` with normalised column names."""
    renamed = frame.copy()
    renamed.columns = [normalise_label(col) for col in renamed.columns]
    return renamed


def prepare_survival_frame(
    frame: pd.DataFrame,
    *,
    required_columns: Iterable[str],
    time_column: str,
    already_log: bool = False,
) -> pd.DataFrame:
    """Normalise and clean a survival data frame.

    Parameters
    ----------
    frame:
        Raw records with one row per subject.
    required_columns:
        Column names (before normalisation is applied to them) that must be present.
    time_column:
        Follow-up time column. Raw times must be strictly positive and are
        replaced by their logarithm unless ``already_log`` is set.

    Returns
    -------
    pandas.DataFrame
        Copy with normalised column names and numeric required columns.
        Missing values raise ``ValueError``; there is no imputation.
    """

    normalised = normalise_columns(frame)
    required = [normalise_label(col) for col in required_columns]
    time_column = normalise_label(time_column)
    if time_column not in required:
        required.append(time_column)

    missing = sorted(set(required) - set(normalised.columns))
    if missing:
        raise ValueError(f"Missing required columns in survival data: {missing}")

    cleaned = normalised.copy()
    for column in required:
        cleaned[column] = pd.to_numeric(cleaned[column], errors="coerce")
    incomplete = cleaned[required].isna().any(axis=1)
    if incomplete.any():
        rows = cleaned.index[incomplete].tolist()[:5]
        raise ValueError(f"Missing or non-numeric values in {int(incomplete.sum())} rows (first rows: {rows})")

    if not already_log:
        times = cleaned[time_column].to_numpy(dtype=float)
        if np.any(times <= 0):
            raise ValueError("Raw follow-up times must be strictly positive; pass already_log for log-times")
        cleaned[time_column] = np.log(times)

    return cleaned.reset_index(drop=True)
