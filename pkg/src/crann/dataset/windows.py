"""Spot-forecasting sample windows over a normalized panel.

One sample per admissible origin hour (stride 1): a long zone-mean
history for the temporal branch, a short per-sensor history for the
spatial branch, the four most recent per-sensor values as autoregressive
terms, horizon-aligned weather standing in for forecasts, and the
per-sensor target block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, WindowingError
from .normalize import NormalizationParams
from .panel import Panel

AR_LAGS = 4
DEFAULT_LOOKBACK = 336
DEFAULT_HORIZON = 24


@dataclass
class SpotSample:
    """One training/evaluation instance anchored at a forecast origin."""

    temporal_input: np.ndarray  # [lookback] zone-mean normalized traffic
    spatial_input: np.ndarray  # [horizon, S] normalized traffic
    ar_terms: np.ndarray  # [4, S]; row k is the value at origin-(k+1)
    exog: np.ndarray  # [horizon, 8] normalized weather at the target hours
    target: np.ndarray  # [horizon, S]
    origin: np.datetime64  # timestamp of the first forecast step
    origin_index: int  # row of ``origin`` in the panel


@dataclass
class Batch:
    """Stacked sample arrays ready for a model forward pass."""

    temporal: np.ndarray  # [B, lookback]
    spatial: np.ndarray  # [B, horizon, S]
    ar: np.ndarray  # [B, 4, S]
    exog: np.ndarray  # [B, horizon, 8]
    target: np.ndarray  # [B, horizon, S]
    full_history: np.ndarray | None = None  # [B, lookback, S] for recurrent baselines

    def __len__(self) -> int:
        return self.temporal.shape[0]


class SpotDataset:
    """All spot samples of a panel under one set of normalization constants."""

    def __init__(self, panel: Panel, params: NormalizationParams, lookback: int, horizon: int):
        if params.sensor_ids != panel.sensor_ids:
            raise ContractError("normalization constants belong to a different sensor set")
        self.panel = panel
        self.params = params
        self.lookback = int(lookback)
        self.horizon = int(horizon)
        if self.lookback < AR_LAGS:
            raise ContractError(f"lookback must cover the {AR_LAGS} autoregressive lags")
        if not np.isfinite(panel.traffic).all() or not np.isfinite(panel.weather).all():
            raise WindowingError("windowing requires an imputed panel (no missing cells)")
        needed = self.lookback + self.horizon
        if panel.n_hours < needed:
            raise WindowingError(
                f"panel has {panel.n_hours} hours; at least {needed} are needed for one sample"
            )
        self.traffic = params.apply_traffic(panel.traffic)
        self.weather = params.apply_weather(panel.weather)
        self.zone_mean = self.traffic.mean(axis=1)
        self.origins = np.arange(self.lookback, panel.n_hours - self.horizon + 1, dtype=np.int64)
        self.samples = [self._sample(int(origin)) for origin in self.origins]

    def _sample(self, origin: int) -> SpotSample:
        ar = self.traffic[origin - AR_LAGS : origin][::-1]
        return SpotSample(
            temporal_input=self.zone_mean[origin - self.lookback : origin],
            spatial_input=self.traffic[origin - self.horizon : origin],
            ar_terms=ar,
            exog=self.weather[origin : origin + self.horizon],
            target=self.traffic[origin : origin + self.horizon],
            origin=self.panel.time_index[origin],
            origin_index=origin,
        )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_sensors(self) -> int:
        return self.panel.n_sensors

    def batch(self, indices, include_full_history: bool = False) -> Batch:
        indices = np.asarray(indices, dtype=np.int64)
        picked = [self.samples[i] for i in indices]
        full = None
        if include_full_history:
            full = np.stack(
                [self.traffic[s.origin_index - self.lookback : s.origin_index] for s in picked]
            )
        return Batch(
            temporal=np.stack([s.temporal_input for s in picked]),
            spatial=np.stack([s.spatial_input for s in picked]),
            ar=np.stack([s.ar_terms for s in picked]),
            exog=np.stack([s.exog for s in picked]),
            target=np.stack([s.target for s in picked]),
            full_history=full,
        )

    def history_window(self, origin_index: int, start_lag: int, stop_lag: int) -> np.ndarray:
        """Normalized traffic rows [origin-start_lag, origin-stop_lag) for naive predictors."""
        if origin_index - start_lag < 0:
            raise WindowingError(f"insufficient history before origin row {origin_index} (need lag {start_lag})")
        return self.traffic[origin_index - start_lag : origin_index - stop_lag]


def make_spot_samples(
    panel: Panel,
    params: NormalizationParams,
    lookback: int = DEFAULT_LOOKBACK,
    horizon: int = DEFAULT_HORIZON,
) -> SpotDataset:
    """Build every admissible sample; errors if the panel is too short."""
    return SpotDataset(panel, params, lookback, horizon)
