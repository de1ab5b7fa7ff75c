import numpy as np
import pytest

from crann.dataset import (
    NormalizationParams,
    Panel,
    aggregate_hourly,
    build_panel,
    fit_minmax,
    impute_missing,
    ingest_traffic,
    make_spot_samples,
)
from crann.errors import IngestionError, NormalizationError, WindowingError

MONDAY = np.datetime64("2021-03-01T00", "h")  # a Monday, hour 0


def hourly_index(n_hours, start=MONDAY):
    return np.arange(start, start + np.timedelta64(n_hours, "h"), dtype="datetime64[h]")


def toy_panel(n_hours, n_sensors=2, seed=0):
    rng = np.random.default_rng(seed)
    traffic = rng.uniform(10.0, 1000.0, size=(n_hours, n_sensors))
    weather = rng.normal(size=(n_hours, 8)) + np.arange(8)
    return Panel(
        time_index=hourly_index(n_hours),
        traffic=traffic,
        weather=weather,
        sensor_ids=[f"s{i}" for i in range(n_sensors)],
        sensor_coords=np.zeros((n_sensors, 2)),
    )


# ---------------------------------------------------------------- ingestion


def test_ingest_groups_quarter_hour_rows(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text(
        "timestamp,sensor_id,intensity\n"
        "2021-03-01T00:00:00,a,400\n"
        "2021-03-01T00:15:00,a,440\n"
        "2021-03-01T00:30:00,a,420\n"
        "2021-03-01T00:45:00,a,460\n"
    )
    readings = ingest_traffic(path)
    assert list(readings) == ["a"]
    assert len(readings["a"]) == 4


def test_ingest_empty_file(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text("timestamp,sensor_id,intensity\n")
    assert ingest_traffic(path) == {}


def test_ingest_bad_intensity_reports_line(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text("timestamp,sensor_id,intensity\n2021-03-01T00:00:00,a,abc\n")
    with pytest.raises(IngestionError) as err:
        ingest_traffic(path)
    assert ":2:" in str(err.value)


def test_ingest_rejects_non_monotone_duplicates(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text(
        "timestamp,sensor_id,intensity\n"
        "2021-03-01T00:15:00,a,10\n"
        "2021-03-01T00:15:00,a,11\n"
    )
    with pytest.raises(IngestionError):
        ingest_traffic(path)


def test_ingest_unknown_sensor_only_rejected_with_explicit_list(tmp_path):
    path = tmp_path / "traffic.csv"
    path.write_text("timestamp,sensor_id,intensity\n2021-03-01T00:00:00,mystery,10\n")
    assert "mystery" in ingest_traffic(path)
    with pytest.raises(IngestionError):
        ingest_traffic(path, sensor_ids=["a", "b"])


# ---------------------------------------------------------------- aggregation


def test_aggregate_hourly_means():
    from datetime import datetime

    readings = {
        "a": [
            (datetime(2021, 3, 1, 0, 0), 400.0),
            (datetime(2021, 3, 1, 0, 15), 440.0),
            (datetime(2021, 3, 1, 0, 30), 420.0),
            (datetime(2021, 3, 1, 0, 45), 460.0),
            (datetime(2021, 3, 1, 1, 10), 100.0),
        ]
    }
    index, matrix = aggregate_hourly(readings, ["a"])
    assert len(index) == 2
    assert matrix[0, 0] == 430.0  # mean of the four quarter-hour readings
    assert matrix[1, 0] == 100.0  # single reading passes through


def test_aggregate_marks_empty_hours_missing():
    from datetime import datetime

    readings = {"a": [(datetime(2021, 3, 1, 0, 0), 5.0), (datetime(2021, 3, 1, 2, 0), 7.0)]}
    _, matrix = aggregate_hourly(readings, ["a"])
    assert np.isnan(matrix[1, 0])


# ---------------------------------------------------------------- imputation


def test_impute_uses_sensor_hour_dow_group_mean():
    panel = toy_panel(3 * 168, n_sensors=1, seed=1)
    monday_8 = [8, 8 + 168, 8 + 336]
    panel.traffic[monday_8[0], 0] = 500.0
    panel.traffic[monday_8[1], 0] = np.nan
    panel.traffic[monday_8[2], 0] = 700.0
    filled = impute_missing(panel)
    assert filled.traffic[monday_8[1], 0] == 600.0


def test_impute_leaves_complete_panel_unchanged():
    panel = toy_panel(200, seed=2)
    filled = impute_missing(panel)
    np.testing.assert_array_equal(filled.traffic, panel.traffic)
    np.testing.assert_array_equal(filled.weather, panel.weather)


def test_impute_degenerate_single_value_fallback():
    panel = toy_panel(100, n_sensors=1, seed=3)
    panel.traffic[:, 0] = np.nan
    panel.traffic[13, 0] = 321.0
    filled = impute_missing(panel)
    np.testing.assert_array_equal(filled.traffic[:, 0], np.full(100, 321.0))


def test_impute_idempotent():
    panel = toy_panel(400, seed=4)
    holes = np.random.default_rng(4).integers(0, 400, size=30)
    panel.traffic[holes, 0] = np.nan
    once = impute_missing(panel)
    twice = impute_missing(once)
    np.testing.assert_array_equal(once.traffic, twice.traffic)


def test_impute_rejects_fully_empty_sensor():
    panel = toy_panel(100, n_sensors=1, seed=5)
    panel.traffic[:] = np.nan
    with pytest.raises(IngestionError):
        impute_missing(panel)


# ---------------------------------------------------------------- normalization


def test_minmax_formula_and_edges():
    panel = toy_panel(1001, n_sensors=1, seed=6)
    panel.traffic[:, 0] = np.arange(1001.0)  # train values {0..1000}
    params = fit_minmax(panel, np.arange(1001))
    assert params.apply_traffic(np.array([500.0]))[0] == 0.5
    assert params.apply_traffic(np.array([0.0]))[0] == 0.0
    assert params.apply_traffic(np.array([1000.0]))[0] == 1.0
    assert params.apply_traffic(np.array([1200.0]))[0] == pytest.approx(1.2)  # no clipping


def test_minmax_roundtrip_identity():
    panel = toy_panel(300, n_sensors=3, seed=7)
    params = fit_minmax(panel, np.arange(200))
    values = np.random.default_rng(7).uniform(-500, 2000, size=(50, 3))
    np.testing.assert_allclose(params.invert_traffic(params.apply_traffic(values)), values, atol=1e-9)
    weather = np.random.default_rng(8).normal(size=(50, 8))
    np.testing.assert_allclose(params.invert_weather(params.apply_weather(weather)), weather, atol=1e-9)


def test_minmax_rejects_constant_series_naming_sensor():
    panel = toy_panel(100, n_sensors=2, seed=8)
    panel.traffic[:, 1] = 77.0
    with pytest.raises(NormalizationError) as err:
        fit_minmax(panel, np.arange(100))
    assert "s1" in str(err.value)


def test_minmax_json_roundtrip(tmp_path):
    panel = toy_panel(100, n_sensors=2, seed=9)
    params = fit_minmax(panel, np.arange(100))
    path = tmp_path / "norm.json"
    params.save(path)
    loaded = NormalizationParams.load(path)
    np.testing.assert_array_equal(loaded.traffic_min, params.traffic_min)
    np.testing.assert_array_equal(loaded.weather_max, params.weather_max)
    assert loaded.sensor_ids == params.sensor_ids


# ---------------------------------------------------------------- windowing


def test_sample_counts_for_panel_lengths():
    for n_hours, expected in [(360, 1), (361, 2)]:
        panel = toy_panel(n_hours, seed=10)
        params = fit_minmax(panel, np.arange(n_hours))
        dataset = make_spot_samples(panel, params)
        assert len(dataset) == expected
    with pytest.raises(WindowingError):
        panel = toy_panel(359, seed=10)
        make_spot_samples(panel, fit_minmax(panel, np.arange(359)))


def test_sample_origins_are_one_hour_apart():
    panel = toy_panel(361, seed=11)
    dataset = make_spot_samples(panel, fit_minmax(panel, np.arange(361)))
    assert dataset.samples[1].origin - dataset.samples[0].origin == np.timedelta64(1, "h")


def test_sample_alignment_invariants():
    panel = toy_panel(400, n_sensors=3, seed=12)
    params = fit_minmax(panel, np.arange(400))
    dataset = make_spot_samples(panel, params)
    normalized = params.apply_traffic(panel.traffic)
    weather = params.apply_weather(panel.weather)
    for sample in dataset.samples[:: max(1, len(dataset) // 7)]:
        o = sample.origin_index
        assert sample.origin == panel.time_index[o]
        np.testing.assert_array_equal(sample.target, normalized[o : o + 24])
        np.testing.assert_array_equal(sample.exog, weather[o : o + 24])
        np.testing.assert_array_equal(sample.spatial_input, normalized[o - 24 : o])
        for lag in range(4):
            np.testing.assert_array_equal(sample.ar_terms[lag], normalized[o - 1 - lag])
        np.testing.assert_allclose(sample.temporal_input, normalized[o - 336 : o].mean(axis=1))


def test_zone_mean_is_unweighted_sensor_mean():
    panel = toy_panel(400, n_sensors=4, seed=13)
    params = fit_minmax(panel, np.arange(400))
    dataset = make_spot_samples(panel, params)
    np.testing.assert_allclose(dataset.zone_mean, params.apply_traffic(panel.traffic).mean(axis=1))


def test_build_panel_excludes_outlier_ranges(tmp_path):
    from datetime import datetime

    readings = {
        "a": [(datetime(2021, 3, 1, h, 0), float(100 + h)) for h in range(6)],
    }
    stamps = [datetime(2021, 3, 1, h, 0) for h in range(6)]
    weather = np.ones((6, 8))
    panel = build_panel(
        readings,
        stamps,
        weather,
        [("a", -3.7, 40.4)],
        exclude_ranges=[(datetime(2021, 3, 1, 2, 0), datetime(2021, 3, 1, 3, 0))],
    )
    assert np.isnan(panel.traffic[2, 0]) and np.isnan(panel.traffic[3, 0])
    assert panel.traffic[4, 0] == 104.0
