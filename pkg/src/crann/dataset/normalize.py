"""Per-series min-max normalization with train-only constants."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import NormalizationError
from .ingest import WEATHER_COLUMNS
from .panel import Panel


@dataclass
class NormalizationParams:
    """Min-max constants per traffic sensor and per weather channel.

    Values outside the training range map outside [0, 1]; nothing is
    clipped, and invert(apply(x)) == x.
    """

    sensor_ids: list[str]
    traffic_min: np.ndarray  # [S]
    traffic_max: np.ndarray  # [S]
    weather_min: np.ndarray  # [8]
    weather_max: np.ndarray  # [8]

    def apply_traffic(self, values: np.ndarray) -> np.ndarray:
        return (values - self.traffic_min) / (self.traffic_max - self.traffic_min)

    def invert_traffic(self, values: np.ndarray) -> np.ndarray:
        return values * (self.traffic_max - self.traffic_min) + self.traffic_min

    def apply_weather(self, values: np.ndarray) -> np.ndarray:
        return (values - self.weather_min) / (self.weather_max - self.weather_min)

    def invert_weather(self, values: np.ndarray) -> np.ndarray:
        return values * (self.weather_max - self.weather_min) + self.weather_min

    def to_json_dict(self) -> dict:
        return {
            "traffic": {
                sensor: {"min": float(lo), "max": float(hi)}
                for sensor, lo, hi in zip(self.sensor_ids, self.traffic_min, self.traffic_max)
            },
            "weather": {
                channel: {"min": float(lo), "max": float(hi)}
                for channel, lo, hi in zip(WEATHER_COLUMNS, self.weather_min, self.weather_max)
            },
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "NormalizationParams":
        sensor_ids = list(payload["traffic"].keys())
        return cls(
            sensor_ids=sensor_ids,
            traffic_min=np.array([payload["traffic"][s]["min"] for s in sensor_ids]),
            traffic_max=np.array([payload["traffic"][s]["max"] for s in sensor_ids]),
            weather_min=np.array([payload["weather"][c]["min"] for c in WEATHER_COLUMNS]),
            weather_max=np.array([payload["weather"][c]["max"] for c in WEATHER_COLUMNS]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "NormalizationParams":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def fit_minmax(panel: Panel, train_rows: np.ndarray) -> NormalizationParams:
    """Fit constants over the given training rows only.

    A series that is constant over the training rows cannot be scaled and
    raises, naming the offending sensor or weather channel.
    """
    train_rows = np.asarray(train_rows, dtype=np.int64)
    if train_rows.size == 0:
        raise NormalizationError("no training rows to fit normalization on")
    traffic = panel.traffic[train_rows]
    weather = panel.weather[train_rows]
    if not np.isfinite(traffic).all() or not np.isfinite(weather).all():
        raise NormalizationError("normalization requires an imputed panel (no missing cells)")

    traffic_min, traffic_max = traffic.min(axis=0), traffic.max(axis=0)
    for sensor, lo, hi in zip(panel.sensor_ids, traffic_min, traffic_max):
        if hi <= lo:
            raise NormalizationError(f"sensor {sensor!r} is constant over the training rows")
    weather_min, weather_max = weather.min(axis=0), weather.max(axis=0)
    for channel, lo, hi in zip(WEATHER_COLUMNS, weather_min, weather_max):
        if hi <= lo:
            raise NormalizationError(f"weather channel {channel!r} is constant over the training rows")
    return NormalizationParams(
        sensor_ids=list(panel.sensor_ids),
        traffic_min=traffic_min.astype(np.float64),
        traffic_max=traffic_max.astype(np.float64),
        weather_min=weather_min.astype(np.float64),
        weather_max=weather_max.astype(np.float64),
    )
