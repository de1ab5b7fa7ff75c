"""Aligned hourly panel of traffic and weather, with aggregation and imputation."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from ..errors import IngestionError
from .ingest import WEATHER_COLUMNS


@dataclass
class Panel:
    """Hourly multi-sensor traffic plus exogenous weather on one time index.

    ``time_index`` is contiguous (one entry per hour, no holes). Cells may
    be NaN until :func:`impute_missing` runs; traffic is non-negative where
    present and the weather matrix always has the eight standard channels.
    """

    time_index: np.ndarray  # datetime64[h], strictly increasing by 1 hour
    traffic: np.ndarray  # [n_times, S]
    weather: np.ndarray  # [n_times, 8]
    sensor_ids: list[str]
    sensor_coords: np.ndarray  # [S, 2] as (longitude, latitude)

    def __post_init__(self):
        steps = np.diff(self.time_index.astype("datetime64[h]").astype(np.int64))
        if steps.size and not (steps == 1).all():
            raise IngestionError("panel time index must be contiguous hourly timestamps")
        if self.traffic.shape != (len(self.time_index), len(self.sensor_ids)):
            raise IngestionError(
                f"traffic shape {self.traffic.shape} inconsistent with "
                f"{len(self.time_index)} hours x {len(self.sensor_ids)} sensors"
            )
        if self.weather.shape != (len(self.time_index), len(WEATHER_COLUMNS)):
            raise IngestionError(f"weather must have {len(WEATHER_COLUMNS)} columns, got {self.weather.shape}")
        with np.errstate(invalid="ignore"):
            if np.any(self.traffic < 0):
                raise IngestionError("traffic intensities must be non-negative")

    @property
    def n_hours(self) -> int:
        return len(self.time_index)

    @property
    def n_sensors(self) -> int:
        return len(self.sensor_ids)

    def hour_of_day(self) -> np.ndarray:
        return self.time_index.astype("datetime64[h]").astype(np.int64) % 24

    def day_of_week(self) -> np.ndarray:
        days = self.time_index.astype("datetime64[D]").astype(np.int64)
        return (days + 3) % 7  # epoch day 0 was a Thursday; 0 = Monday


def _floor_hour(stamp: datetime) -> np.datetime64:
    return np.datetime64(stamp.replace(minute=0, second=0, microsecond=0), "h")


def aggregate_hourly(
    readings: dict[str, list[tuple[datetime, float]]], sensor_ids: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    """Average sub-hourly readings into per-sensor hourly means.

    Returns the contiguous hourly index spanning all readings and a
    [n_hours x S] matrix with NaN for hours without any reading.
    """
    all_hours = [
        _floor_hour(stamp) for sensor in sensor_ids for stamp, _ in readings.get(sensor, [])
    ]
    if not all_hours:
        return np.empty(0, dtype="datetime64[h]"), np.zeros((0, len(sensor_ids)))
    start, stop = min(all_hours), max(all_hours)
    index = np.arange(start, stop + np.timedelta64(1, "h"), dtype="datetime64[h]")
    sums = np.zeros((len(index), len(sensor_ids)))
    counts = np.zeros((len(index), len(sensor_ids)))
    base = index[0].astype(np.int64)
    for column, sensor in enumerate(sensor_ids):
        for stamp, value in readings.get(sensor, []):
            row = int(_floor_hour(stamp).astype(np.int64) - base)
            sums[row, column] += value
            counts[row, column] += 1
    with np.errstate(invalid="ignore"):
        matrix = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return index, matrix


def build_panel(
    traffic_readings: dict[str, list[tuple[datetime, float]]],
    weather_stamps: Sequence[datetime],
    weather_matrix: np.ndarray,
    sensor_meta: Sequence[tuple[str, float, float]],
    exclude_ranges: Sequence[tuple[datetime, datetime]] | None = None,
) -> Panel:
    """Assemble the hourly panel; excluded ranges become missing cells."""
    if not sensor_meta:
        raise IngestionError("sensor metadata is empty")
    sensor_ids = [sensor for sensor, _, _ in sensor_meta]
    coords = np.asarray([[lon, lat] for _, lon, lat in sensor_meta], dtype=np.float64)
    missing_series = [s for s in sensor_ids if not traffic_readings.get(s)]
    if missing_series:
        raise IngestionError(f"no traffic readings for sensors: {', '.join(missing_series)}")

    index, traffic = aggregate_hourly(traffic_readings, sensor_ids)
    if index.size == 0:
        raise IngestionError("no traffic readings at all")

    weather = np.full((len(index), len(WEATHER_COLUMNS)), np.nan)
    base = index[0].astype(np.int64)
    for stamp, row in zip(weather_stamps, np.asarray(weather_matrix, dtype=np.float64)):
        position = int(_floor_hour(stamp).astype(np.int64) - base)
        if 0 <= position < len(index):
            weather[position] = row

    if exclude_ranges:
        hours = index.astype(np.int64)
        for start, stop in exclude_ranges:
            lo = _floor_hour(start).astype(np.int64)
            hi = _floor_hour(stop).astype(np.int64)
            mask = (hours >= lo) & (hours <= hi)
            traffic[mask] = np.nan

    return Panel(time_index=index, traffic=traffic, weather=weather, sensor_ids=sensor_ids, sensor_coords=coords)


def _impute_columns(matrix: np.ndarray, groups: np.ndarray, n_groups: int, labels: Sequence[str]) -> np.ndarray:
    """Fill NaN cells by same-group mean, falling back to the column mean."""
    out = matrix.copy()
    for column in range(matrix.shape[1]):
        values = matrix[:, column]
        present = np.isfinite(values)
        if not present.any():
            raise IngestionError(f"series {labels[column]!r} has no observed values to impute from")
        if present.all():
            continue
        sums = np.bincount(groups[present], weights=values[present], minlength=n_groups)
        counts = np.bincount(groups[present], minlength=n_groups)
        column_mean = values[present].mean()
        with np.errstate(invalid="ignore"):
            group_means = np.where(counts > 0, sums / np.maximum(counts, 1), column_mean)
        holes = ~present
        out[holes, column] = group_means[groups[holes]]
    return out


def impute_missing(panel: Panel) -> Panel:
    """Replace missing cells with the (hour-of-day, day-of-week) group mean.

    The grouping is per series, so a missing Monday-08:00 reading becomes
    the mean of that sensor's other Monday-08:00 readings. Groups with no
    observations fall back to the series mean. Idempotent.
    """
    groups = (panel.hour_of_day() * 7 + panel.day_of_week()).astype(np.int64)
    traffic = _impute_columns(panel.traffic, groups, 24 * 7, panel.sensor_ids)
    weather = _impute_columns(panel.weather, groups, 24 * 7, list(WEATHER_COLUMNS))
    return Panel(
        time_index=panel.time_index,
        traffic=traffic,
        weather=weather,
        sensor_ids=list(panel.sensor_ids),
        sensor_coords=panel.sensor_coords.copy(),
    )
