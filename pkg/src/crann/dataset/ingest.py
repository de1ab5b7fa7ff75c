"""CSV ingestion for traffic readings, weather observations and sensor metadata.

Formats
-------
traffic:  ``timestamp,sensor_id,intensity`` — ISO-8601 timestamps, one row per
          sub-hourly reading (typically every 15 minutes), intensity >= 0.
weather:  ``timestamp,temperature,solar_radiation,wind_speed,wind_direction,
          rainfall,pressure,humidity,uv`` — hourly rows.
sensors:  ``sensor_id,longitude,latitude``.
"""

from __future__ import annotations

import csv
from datetime import datetime
from pathlib import Path

import numpy as np

from ..errors import IngestionError

WEATHER_COLUMNS = (
    "temperature",
    "solar_radiation",
    "wind_speed",
    "wind_direction",
    "rainfall",
    "pressure",
    "humidity",
    "uv",
)

TRAFFIC_HEADER = ["timestamp", "sensor_id", "intensity"]
WEATHER_HEADER = ["timestamp", *WEATHER_COLUMNS]
SENSOR_HEADER = ["sensor_id", "longitude", "latitude"]


def _parse_timestamp(raw: str, path: Path, line: int) -> datetime:
    try:
        return datetime.fromisoformat(raw.strip())
    except ValueError as exc:
        raise IngestionError(f"{path}:{line}: bad timestamp {raw!r}: {exc}") from exc


def _parse_float(raw: str, path: Path, line: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise IngestionError(f"{path}:{line}: bad value {raw!r} for {column}") from exc


def _check_header(row: list[str], expected: list[str], path: Path) -> None:
    if [cell.strip() for cell in row] != expected:
        raise IngestionError(f"{path}:1: header must be {','.join(expected)!r}")


def ingest_traffic(path, sensor_ids: list[str] | None = None) -> dict[str, list[tuple[datetime, float]]]:
    """Parse sub-hourly traffic readings grouped by sensor.

    Timestamps must be strictly increasing per sensor. When ``sensor_ids``
    is given, rows for unknown sensors are an error; otherwise sensors are
    discovered from the file.
    """
    path = Path(path)
    readings: dict[str, list[tuple[datetime, float]]] = {}
    allowed = set(sensor_ids) if sensor_ids is not None else None
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return {}
        _check_header(header, TRAFFIC_HEADER, path)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestionError(f"{path}:{line}: expected 3 columns, got {len(row)}")
            stamp = _parse_timestamp(row[0], path, line)
            sensor = row[1].strip()
            if allowed is not None and sensor not in allowed:
                raise IngestionError(f"{path}:{line}: unknown sensor {sensor!r}")
            value = _parse_float(row[2], path, line, "intensity")
            if value < 0:
                raise IngestionError(f"{path}:{line}: negative intensity {value}")
            series = readings.setdefault(sensor, [])
            if series and stamp <= series[-1][0]:
                raise IngestionError(
                    f"{path}:{line}: timestamp {stamp.isoformat()} not after previous "
                    f"{series[-1][0].isoformat()} for sensor {sensor!r}"
                )
            series.append((stamp, value))
    return readings


def ingest_weather(path) -> tuple[list[datetime], np.ndarray]:
    """Parse hourly weather rows into (timestamps, [n x 8] matrix)."""
    path = Path(path)
    stamps: list[datetime] = []
    rows: list[list[float]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return [], np.zeros((0, len(WEATHER_COLUMNS)))
        _check_header(header, WEATHER_HEADER, path)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 1 + len(WEATHER_COLUMNS):
                raise IngestionError(f"{path}:{line}: expected {1 + len(WEATHER_COLUMNS)} columns, got {len(row)}")
            stamp = _parse_timestamp(row[0], path, line)
            if stamps and stamp <= stamps[-1]:
                raise IngestionError(f"{path}:{line}: weather timestamps must strictly increase")
            stamps.append(stamp)
            rows.append([_parse_float(cell, path, line, name) for cell, name in zip(row[1:], WEATHER_COLUMNS)])
    return stamps, np.asarray(rows, dtype=np.float64).reshape(len(stamps), len(WEATHER_COLUMNS))


def ingest_sensor_metadata(path) -> list[tuple[str, float, float]]:
    """Parse ``sensor_id,longitude,latitude`` rows; ids must be unique."""
    path = Path(path)
    seen: set[str] = set()
    sensors: list[tuple[str, float, float]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return []
        _check_header(header, SENSOR_HEADER, path)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestionError(f"{path}:{line}: expected 3 columns, got {len(row)}")
            sensor = row[0].strip()
            if sensor in seen:
                raise IngestionError(f"{path}:{line}: duplicate sensor {sensor!r}")
            seen.add(sensor)
            sensors.append(
                (sensor, _parse_float(row[1], path, line, "longitude"), _parse_float(row[2], path, line, "latitude"))
            )
    return sensors
