import math

import numpy as np
import pytest

from crann.errors import DimensionError, MetricError
from crann.metrics import bias, evaluate_all, pool_samples, rmse, wmape


def oracle_rmse(pred, actual):
    total = 0.0
    rows, cols = pred.shape
    for i in range(rows):
        for j in range(cols):
            total += (pred[i, j] - actual[i, j]) ** 2
    return math.sqrt(total / (rows * cols))


def oracle_bias(pred, actual):
    total = 0.0
    rows, cols = pred.shape
    for i in range(rows):
        for j in range(cols):
            total += pred[i, j] - actual[i, j]
    return total / (rows * cols)


def oracle_wmape(pred, actual):
    num = 0.0
    den = 0.0
    rows, cols = pred.shape
    for i in range(rows):
        for j in range(cols):
            num += abs(pred[i, j] - actual[i, j])
            den += abs(actual[i, j])
    return 100.0 * num / den


def test_rmse_hand_cases():
    ones = np.array([[2.0, 2.0]])
    assert rmse(ones, np.zeros((1, 2))) == 2.0
    assert rmse(ones, ones) == 0.0


def test_rmse_matches_double_loop_oracle():
    rng = np.random.default_rng(0)
    pred, actual = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    assert abs(rmse(pred, actual) - oracle_rmse(pred, actual)) < 1e-12


def test_bias_hand_cases():
    assert bias(np.array([[1.0, 3.0]]), np.array([[2.0, 2.0]])) == 0.0
    assert bias(np.array([[5.0]]), np.array([[5.0]])) == 0.0


def test_bias_antisymmetry():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    assert abs(bias(a, b) + bias(b, a)) < 1e-12


def test_wmape_hand_cases():
    actual = np.array([[1.0, 3.0]])
    assert wmape(actual, actual) == 0.0
    assert wmape(np.zeros((1, 2)), actual) == 100.0


def test_wmape_scale_invariance():
    rng = np.random.default_rng(2)
    pred, actual = rng.normal(size=(4, 3)), rng.normal(size=(4, 3)) + 5.0
    assert abs(wmape(3.7 * pred, 3.7 * actual) - wmape(pred, actual)) < 1e-9


def test_wmape_rejects_all_zero_actuals():
    with pytest.raises(MetricError):
        wmape(np.ones((2, 2)), np.zeros((2, 2)))


def test_shape_mismatch_rejected():
    with pytest.raises(DimensionError):
        rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_all_metrics_match_oracles_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(200):
        rows = int(rng.integers(1, 6))
        cols = int(rng.integers(1, 6))
        pred = rng.normal(size=(rows, cols)) * 100.0
        actual = rng.normal(size=(rows, cols)) * 100.0 + 10.0
        result = evaluate_all(pred, actual)
        assert abs(result.rmse - oracle_rmse(pred, actual)) < 1e-12
        assert abs(result.bias - oracle_bias(pred, actual)) < 1e-12
        assert abs(result.wmape - oracle_wmape(pred, actual)) < 1e-12
        assert abs(result.bias) <= result.rmse


def test_pooling_pools_cells_not_sample_means():
    # two samples of different magnitudes: pooling must weight every cell equally
    pred = [np.zeros((1, 1)), np.zeros((2, 1))]
    actual = [np.array([[3.0]]), np.array([[0.0], [0.0]])]
    pooled = pool_samples(pred, actual)
    assert abs(pooled.rmse - math.sqrt(9.0 / 3.0)) < 1e-12
    assert abs(pooled.bias + 1.0) < 1e-12
