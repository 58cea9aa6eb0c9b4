"""Common utilities shared across data ingestion flows."""
from .data_ingestion import normalise_columns, normalise_label, prepare_survival_frame

__all__ = ["normalise_columns", "normalise_label", "prepare_survival_frame"]
