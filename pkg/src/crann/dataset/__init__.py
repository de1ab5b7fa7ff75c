"""Data pipeline: ingestion, hourly panels, normalization, windows and folds."""

from .folds import DEFAULT_GAP, Fold, FoldPlan, blocked_kfold, train_row_mask
from .ingest import WEATHER_COLUMNS, ingest_sensor_metadata, ingest_traffic, ingest_weather
from .normalize import NormalizationParams, fit_minmax
from .panel import Panel, aggregate_hourly, build_panel, impute_missing
from .windows import (
    AR_LAGS,
    DEFAULT_HORIZON,
    DEFAULT_LOOKBACK,
    Batch,
    SpotDataset,
    SpotSample,
    make_spot_samples,
)

__all__ = [
    "AR_LAGS",
    "DEFAULT_GAP",
    "DEFAULT_HORIZON",
    "DEFAULT_LOOKBACK",
    "Batch",
    "Fold",
    "FoldPlan",
    "NormalizationParams",
    "Panel",
    "SpotDataset",
    "SpotSample",
    "WEATHER_COLUMNS",
    "aggregate_hourly",
    "blocked_kfold",
    "build_panel",
    "fit_minmax",
    "impute_missing",
    "ingest_sensor_metadata",
    "ingest_traffic",
    "ingest_weather",
    "make_spot_samples",
    "train_row_mask",
]
