"""Spatio-temporal error metrics: RMSE, bias and WMAPE.

All three pool every cell of the compared arrays; fold-level numbers are
computed by pooling all test samples' cells first, then applying the
formulas once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, MetricError


@dataclass(frozen=True)
class MetricResult:
    rmse: float
    bias: float
    wmape: float

    def as_dict(self) -> dict[str, float]:
        return {"rmse": self.rmse, "bias": self.bias, "wmape": self.wmape}


def _check_shapes(prediction: np.ndarray, actual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    prediction = np.asarray(prediction, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if prediction.shape != actual.shape:
        raise DimensionError(f"metric shapes differ: {prediction.shape} vs {actual.shape}")
    if prediction.size == 0:
        raise DimensionError("metrics need at least one cell")
    return prediction, actual


def rmse(prediction, actual) -> float:
    """Root mean squared error over all cells."""
    prediction, actual = _check_shapes(prediction, actual)
    return float(math.sqrt(np.mean((prediction - actual) ** 2)))


def bias(prediction, actual) -> float:
    """Mean signed residual; negative means underestimation."""
    prediction, actual = _check_shapes(prediction, actual)
    return float(np.mean(prediction - actual))


def wmape(prediction, actual) -> float:
    """Total absolute error as a percentage of total absolute actuals."""
    prediction, actual = _check_shapes(prediction, actual)
    denominator = float(np.abs(actual).sum())
    if denominator == 0.0:
        raise MetricError("WMAPE undefined: actual values are all zero")
    return float(100.0 * np.abs(prediction - actual).sum() / denominator)


def evaluate_all(prediction, actual) -> MetricResult:
    return MetricResult(rmse=rmse(prediction, actual), bias=bias(prediction, actual), wmape=wmape(prediction, actual))


def pool_samples(predictions: list[np.ndarray], actuals: list[np.ndarray]) -> MetricResult:
    """Metrics over the concatenation of many [T x S] samples."""
    if not predictions or len(predictions) != len(actuals):
        raise DimensionError("pool_samples needs matching non-empty prediction/actual lists")
    return evaluate_all(np.concatenate([np.asarray(p) for p in predictions]), np.concatenate([np.asarray(a) for a in actuals]))
