"""Deterministic synthetic traffic generator for desk-scale experiments.

Each sensor follows a daily/weekly seasonal curve with optional trend,
first-order spatial coupling and Gaussian noise, clamped at zero:

    x_s(t) = base_s + daily*sin(2*pi*t/24 + phase_s) + weekly*sin(2*pi*t/168)
             + slope*t/24 + sum_k C[s,k]*x_k(t-1) + noise

Weather channels are smooth daily/weekly sinusoids with diverse phases,
tilted toward the zone-mean traffic curve by a configurable coefficient.
The generator can also emit CSV files in the exact ingestion schema so
the whole pipeline can be exercised end to end.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import WEATHER_COLUMNS, Panel
from .errors import ConfigError
from .rng import substream

HOURS_PER_DAY = 24
HOURS_PER_WEEK = 168


def uniform_coupling(n_sensors: int, strength: float) -> np.ndarray:
    """Every sensor leans on all others equally; row sums equal ``strength``."""
    if n_sensors < 2:
        return np.zeros((n_sensors, n_sensors))
    matrix = np.full((n_sensors, n_sensors), strength / (n_sensors - 1))
    np.fill_diagonal(matrix, 0.0)
    return matrix


def driver_coupling(n_sensors: int, strength: float) -> np.ndarray:
    """Sensor 0 drives every other sensor; useful ground truth for attention."""
    matrix = np.zeros((n_sensors, n_sensors))
    matrix[1:, 0] = strength
    return matrix


@dataclass
class SynthConfig:
    n_sensors: int = 6
    n_days: int = 90
    base_level: float = 120.0
    base_spread: float = 30.0
    daily_amplitude: float = 40.0
    weekly_amplitude: float = 15.0
    trend_slope: float = 0.0  # vehicles/hour gained per day
    coupling: np.ndarray | None = None
    noise_std: float = 8.0
    weather_coupling: float = 0.5
    seed: int = 0
    start: str = "2021-03-01T00"
    subhourly_jitter: float = 0.05  # +/- fraction applied to quarter-hour rows
    missing_hour_rate: float = 0.0  # sensor-hours dropped from the emitted CSV
    sensor_phases: np.ndarray | None = field(default=None, repr=False)

    def coupling_matrix(self) -> np.ndarray:
        if self.coupling is None:
            return np.zeros((self.n_sensors, self.n_sensors))
        matrix = np.asarray(self.coupling, dtype=np.float64)
        if matrix.shape != (self.n_sensors, self.n_sensors):
            raise ConfigError(f"coupling matrix {matrix.shape} does not match {self.n_sensors} sensors")
        return matrix


def generate(cfg: SynthConfig) -> Panel:
    """Build a complete hourly panel; identical seeds give identical panels."""
    if cfg.n_days < 16:
        raise ConfigError(f"need at least 16 days for one sample window, got {cfg.n_days}")
    coupling = cfg.coupling_matrix()
    radius = float(np.abs(np.linalg.eigvals(coupling)).max()) if coupling.any() else 0.0
    if radius >= 1.0:
        raise ConfigError(f"unstable coupling: spectral radius {radius:.3f} >= 1")

    n_hours = cfg.n_days * HOURS_PER_DAY
    hours = np.arange(n_hours)
    rng = substream(cfg.seed, "synth", "traffic")

    bases = cfg.base_level + rng.uniform(-cfg.base_spread, cfg.base_spread, size=cfg.n_sensors)
    phases = (
        np.asarray(cfg.sensor_phases, dtype=np.float64)
        if cfg.sensor_phases is not None
        else rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_sensors)
    )
    daily = np.sin(2.0 * np.pi * hours[:, None] / HOURS_PER_DAY + phases[None, :])
    weekly = np.sin(2.0 * np.pi * hours / HOURS_PER_WEEK)
    deterministic = (
        bases[None, :]
        + cfg.daily_amplitude * daily
        + cfg.weekly_amplitude * weekly[:, None]
        + cfg.trend_slope * hours[:, None] / HOURS_PER_DAY
    )
    noise = rng.normal(0.0, cfg.noise_std, size=(n_hours, cfg.n_sensors)) if cfg.noise_std > 0 else np.zeros((n_hours, cfg.n_sensors))

    traffic = np.empty((n_hours, cfg.n_sensors))
    traffic[0] = np.maximum(deterministic[0] + noise[0], 0.0)
    if coupling.any():
        for t in range(1, n_hours):
            traffic[t] = np.maximum(deterministic[t] + coupling @ traffic[t - 1] + noise[t], 0.0)
    else:
        traffic[1:] = np.maximum(deterministic[1:] + noise[1:], 0.0)

    weather = _weather_channels(cfg, hours, traffic)
    start = np.datetime64(cfg.start, "h")
    index = np.arange(start, start + np.timedelta64(n_hours, "h"), dtype="datetime64[h]")
    coords = np.stack(
        [-3.70 + 0.01 * np.arange(cfg.n_sensors), 40.40 + 0.01 * np.arange(cfg.n_sensors)], axis=1
    )
    return Panel(
        time_index=index,
        traffic=traffic,
        weather=weather,
        sensor_ids=[f"s{str(i).zfill(2)}" for i in range(cfg.n_sensors)],
        sensor_coords=coords,
    )


def _weather_channels(cfg: SynthConfig, hours: np.ndarray, traffic: np.ndarray) -> np.ndarray:
    """Eight smooth channels with phase-diverse daily/weekly structure."""
    rng = substream(cfg.seed, "synth", "weather")
    zone = traffic.mean(axis=1)
    zone_std = zone.std() if zone.std() > 0 else 1.0
    standardized = (zone - zone.mean()) / zone_std

    offsets = np.array([15.0, 300.0, 3.0, 180.0, 1.0, 1013.0, 60.0, 2.0])
    amplitudes = np.array([8.0, 250.0, 1.5, 90.0, 0.8, 6.0, 20.0, 1.5])
    day = 2.0 * np.pi * hours / HOURS_PER_DAY
    week = 2.0 * np.pi * hours / HOURS_PER_WEEK
    shapes = np.stack(
        [
            np.sin(day),
            np.sin(day + np.pi / 2.0),
            np.sin(day + np.pi),
            np.sin(day + 3.0 * np.pi / 2.0),
            np.sin(week),
            np.sin(week + np.pi / 2.0),
            np.sin(2.0 * np.pi * hours / max(len(hours), 1)),
            0.5 * np.sin(day) + 0.5 * np.sin(week),
        ],
        axis=1,
    )
    jitter = rng.normal(0.0, 0.02, size=shapes.shape)
    weather = offsets[None, :] + amplitudes[None, :] * (
        shapes + cfg.weather_coupling * standardized[:, None] + jitter
    )
    return weather


# -- CSV emission -------------------------------------------------------------

QUARTER_PATTERN = (1.0, -1.0, 1.0, -1.0)  # jitter signs; they cancel within the hour


def write_csvs(panel: Panel, out_dir, cfg: SynthConfig) -> dict[str, Path]:
    """Emit traffic/weather/sensor CSVs in the ingestion schema.

    Traffic is written as four quarter-hour rows per sensor-hour whose
    mean reproduces the hourly value exactly; a configurable fraction of
    sensor-hours is dropped to exercise imputation downstream.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "traffic": out_dir / "traffic.csv",
        "weather": out_dir / "weather.csv",
        "sensors": out_dir / "sensors.csv",
    }
    drop_rng = substream(cfg.seed, "synth", "missing")

    with open(paths["traffic"], "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "sensor_id", "intensity"])
        stamps = panel.time_index.astype("datetime64[m]")
        for row, stamp in enumerate(stamps):
            for column, sensor in enumerate(panel.sensor_ids):
                if cfg.missing_hour_rate > 0 and drop_rng.random() < cfg.missing_hour_rate:
                    continue
                value = panel.traffic[row, column]
                delta = cfg.subhourly_jitter * value
                for quarter, sign in enumerate(QUARTER_PATTERN):
                    minute_stamp = stamp + np.timedelta64(15 * quarter, "m")
                    writer.writerow([str(minute_stamp), sensor, f"{value + sign * delta:.6f}"])

    with open(paths["weather"], "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", *WEATHER_COLUMNS])
        for row, stamp in enumerate(panel.time_index.astype("datetime64[m]")):
            writer.writerow([str(stamp), *(f"{v:.6f}" for v in panel.weather[row])])

    with open(paths["sensors"], "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sensor_id", "longitude", "latitude"])
        for sensor, (lon, lat) in zip(panel.sensor_ids, panel.sensor_coords):
            writer.writerow([sensor, f"{lon:.6f}", f"{lat:.6f}"])
    return paths
