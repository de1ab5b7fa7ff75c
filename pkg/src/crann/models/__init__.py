"""Forecasting estimators with a scikit-learn-style fit/predict surface."""

from .base import BaseForecaster
from .baselines import (
    BASELINE_KINDS,
    CnnForecaster,
    CnnLstmForecaster,
    LstmForecaster,
    PersistenceForecaster,
    SeasonalNaiveForecaster,
    Seq2SeqForecaster,
    build_baseline,
)
from .crann import CrannForecaster, CrannNetwork, assemble_features, feature_length
from .spatial import SensorGrid, SpatialModule, attend_output, build_grid, st_attention
from .temporal import TemporalModule, attention_context

__all__ = [
    "BASELINE_KINDS",
    "BaseForecaster",
    "CnnForecaster",
    "CnnLstmForecaster",
    "CrannForecaster",
    "CrannNetwork",
    "LstmForecaster",
    "PersistenceForecaster",
    "SeasonalNaiveForecaster",
    "Seq2SeqForecaster",
    "SensorGrid",
    "SpatialModule",
    "TemporalModule",
    "assemble_features",
    "attend_output",
    "attention_context",
    "build_baseline",
    "build_grid",
    "feature_length",
    "st_attention",
]
