"""Control-function survival estimation under dependent, independent and administrative censoring."""
from .data import Dataset, ObservedRecord
from .estimator import FitConfig, FitResult, FitVariant, fit, predict_survival, wald_table
from .firststage import FirstStageKind, FirstStageResult, FirstStageSpec, fit_first_stage
from .likelihood import EtaParams

__all__ = [
    "Dataset",
    "EtaParams",
    "FirstStageKind",
    "FirstStageResult",
    "FirstStageSpec",
    "FitConfig",
    "FitResult",
    "FitVariant",
    "ObservedRecord",
    "fit",
    "fit_first_stage",
    "predict_survival",
    "wald_table",
]
