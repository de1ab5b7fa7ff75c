"""Comparison models: CNN, LSTM, CNN+LSTM, seq2seq, and two naive predictors.

The neural baselines share the grid embedding, batching, training loop
and metrics with the main forecaster so all comparisons ride on
identical folds and normalization constants.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import LSTM, Linear, Module, Tensor, concat, reshape, stack, tensor_mean
from ..dataset import Batch, SpotDataset
from ..errors import ConstructionError, WindowingError
from ..rng import substream
from .base import BaseForecaster
from .spatial import ConvStack, build_grid

SEASONAL_PERIOD = 168  # one week of hourly lags


class _LstmStack(Module):
    """Plain multi-layer recurrence: each layer feeds the next one's input."""

    def __init__(self, input_size: int, hidden_size: int, n_layers: int, rng):
        super().__init__()
        self.layers = [
            LSTM(input_size if i == 0 else hidden_size, hidden_size, rng) for i in range(n_layers)
        ]

    def initial_state(self, batch: int) -> list[tuple[Tensor, Tensor]]:
        return [layer.initial_state(batch) for layer in self.layers]

    def step(self, x: Tensor, states: list[tuple[Tensor, Tensor]]):
        new_states = []
        out = x
        for layer, state in zip(self.layers, states):
            out, cell = layer.step(out, state)
            new_states.append((out, cell))
        return out, new_states

    def run(self, sequence: Tensor) -> tuple[list[Tensor], list[tuple[Tensor, Tensor]]]:
        """Consume [B, T, F]; returns last-layer outputs per step and final states."""
        states = self.initial_state(sequence.shape[0])
        outputs = []
        for step in range(sequence.shape[1]):
            out, states = self.step(sequence[:, step], states)
            outputs.append(out)
        return outputs, states


class CnnForecaster(BaseForecaster):
    """2-D convolutional model; channels are the input lags."""

    def __init__(self, conv_channels: tuple[int, ...] = (32, 32, 32, 64, 64, 64), grid_layout: str = "square", seed: int = 0):
        self.conv_channels = conv_channels
        self.grid_layout = grid_layout
        self.seed = seed

    def _build(self, dataset: SpotDataset) -> None:
        grid = build_grid(dataset.panel.sensor_ids, coords=dataset.panel.sensor_coords, layout=self.grid_layout)
        self.grid_ = grid
        self.network_ = _CnnNetwork(dataset.horizon, grid, tuple(self.conv_channels), self.seed)
        self.built_ = True

    @property
    def network(self):
        return self.network_

    def forward(self, batch: Batch) -> Tensor:
        return self.network_.stack_forward(Tensor(batch.spatial))

    def describe(self) -> dict:
        base = super().describe()
        base["conv_channels"] = list(self.conv_channels)
        return base


class _CnnNetwork(Module):
    def __init__(self, horizon, grid, widths, seed):
        super().__init__()
        self.grid = grid
        self.horizon = horizon
        self.stack = ConvStack(horizon, widths, grid, substream(seed, "init", "cnn"))

    def stack_forward(self, x: Tensor) -> Tensor:
        from ..autodiff import gather_grid, scatter_grid

        grid_input = scatter_grid(x, (self.grid.height, self.grid.width), self.grid.rows, self.grid.cols)
        return gather_grid(self.stack(grid_input), self.grid.rows, self.grid.cols)


class LstmForecaster(BaseForecaster):
    """Stacked recurrence over the full per-sensor lookback, affine head."""

    needs_full_history = True

    def __init__(self, hidden_size: int = 100, n_layers: int = 2, seed: int = 0):
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.seed = seed

    def _build(self, dataset: SpotDataset) -> None:
        rng = substream(self.seed, "init", "lstm")
        self.network_ = _RecurrentHead(
            input_size=dataset.n_sensors,
            hidden_size=self.hidden_size,
            n_layers=self.n_layers,
            out_features=dataset.horizon * dataset.n_sensors,
            rng=rng,
        )
        self._shape = (dataset.horizon, dataset.n_sensors)
        self.built_ = True

    @property
    def network(self):
        return self.network_

    def forward(self, batch: Batch) -> Tensor:
        outputs, _ = self.network_.stack.run(Tensor(batch.full_history))
        flat = self.network_.head(outputs[-1])
        return reshape(flat, (len(batch),) + self._shape)

    def describe(self) -> dict:
        base = super().describe()
        base.update({"lstm_layers": self.n_layers, "hidden_units": self.hidden_size})
        return base


class _RecurrentHead(Module):
    def __init__(self, input_size, hidden_size, n_layers, out_features, rng):
        super().__init__()
        self.stack = _LstmStack(input_size, hidden_size, n_layers, rng)
        self.head = Linear(hidden_size, out_features, rng)


class CnnLstmForecaster(BaseForecaster):
    """Convolution stack feeding a stacked recurrence over the horizon lags."""

    def __init__(
        self,
        conv_channels: tuple[int, ...] = (32, 32, 64, 64, 64),
        hidden_size: int = 100,
        n_layers: int = 2,
        grid_layout: str = "square",
        seed: int = 0,
    ):
        self.conv_channels = conv_channels
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.grid_layout = grid_layout
        self.seed = seed

    def _build(self, dataset: SpotDataset) -> None:
        grid = build_grid(dataset.panel.sensor_ids, coords=dataset.panel.sensor_coords, layout=self.grid_layout)
        self.grid_ = grid
        self.network_ = _CnnLstmNetwork(
            dataset.horizon, dataset.n_sensors, grid, tuple(self.conv_channels),
            self.hidden_size, self.n_layers, self.seed,
        )
        self._shape = (dataset.horizon, dataset.n_sensors)
        self.built_ = True

    @property
    def network(self):
        return self.network_

    def forward(self, batch: Batch) -> Tensor:
        net = self.network_
        convolved = net.cnn.stack_forward(Tensor(batch.spatial))  # [B, T, S]
        outputs, _ = net.stack.run(convolved)
        flat = net.head(outputs[-1])
        return reshape(flat, (len(batch),) + self._shape)

    def describe(self) -> dict:
        base = super().describe()
        base.update(
            {"conv_channels": list(self.conv_channels), "lstm_layers": self.n_layers, "hidden_units": self.hidden_size}
        )
        return base


class _CnnLstmNetwork(Module):
    def __init__(self, horizon, n_sensors, grid, widths, hidden_size, n_layers, seed):
        super().__init__()
        self.cnn = _CnnNetwork(horizon, grid, widths, seed)
        rng = substream(seed, "init", "cnn-lstm")
        self.stack = _LstmStack(n_sensors, hidden_size, n_layers, rng)
        self.head = Linear(hidden_size, horizon * n_sensors, rng)


class Seq2SeqForecaster(BaseForecaster):
    """Encoder-decoder without bottleneck over the full per-sensor lookback.

    The decoder sees, at every step, its previous output concatenated with
    the mean of all encoder hidden states, so information from every input
    timestep stays available throughout decoding.
    """

    needs_full_history = True

    def __init__(self, hidden_size: int = 100, n_layers: int = 2, seed: int = 0):
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.seed = seed

    def _build(self, dataset: SpotDataset) -> None:
        rng = substream(self.seed, "init", "seq2seq")
        self.network_ = _Seq2SeqNetwork(dataset.n_sensors, self.hidden_size, self.n_layers, rng)
        self._shape = (dataset.horizon, dataset.n_sensors)
        self.built_ = True

    @property
    def network(self):
        return self.network_

    def forward(self, batch: Batch) -> Tensor:
        net = self.network_
        horizon = self._shape[0]
        history = Tensor(batch.full_history)
        encoder_outputs, states = net.encoder.run(history)
        summary = tensor_mean(stack(encoder_outputs, axis=1), axis=1)  # [B, H]
        previous = history[:, history.shape[1] - 1]  # last observed row [B, S]
        steps = []
        for _ in range(horizon):
            out, states = net.decoder.step(concat([previous, summary], axis=1), states)
            previous = net.head(out)
            steps.append(previous)
        return stack(steps, axis=1)

    def describe(self) -> dict:
        base = super().describe()
        base.update({"lstm_layers": self.n_layers, "hidden_units": self.hidden_size})
        return base


class _Seq2SeqNetwork(Module):
    def __init__(self, n_sensors, hidden_size, n_layers, rng):
        super().__init__()
        self.encoder = _LstmStack(n_sensors, hidden_size, n_layers, rng)
        self.decoder = _LstmStack(n_sensors + hidden_size, hidden_size, n_layers, rng)
        self.head = Linear(hidden_size, n_sensors, rng)


class _NaiveForecaster(BaseForecaster):
    """Shared scaffolding for training-free reference predictors."""

    def fit(self, dataset: SpotDataset, train_indices=None, validation_indices=None, config=None):
        self.horizon_ = dataset.horizon
        self.n_sensors_ = dataset.n_sensors
        self.built_ = True
        return self

    def parameters(self):
        return {}

    def set_training(self, flag: bool) -> None:
        pass

    def describe(self) -> dict:
        self._require_fitted()
        return {"model": type(self).__name__, "parameter_count": 0}


class PersistenceForecaster(_NaiveForecaster):
    """Copies the last observed value of each sensor to every horizon."""

    def predict(self, dataset: SpotDataset, indices=None) -> np.ndarray:
        self._require_fitted()
        indices = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
        out = np.empty((len(indices), dataset.horizon, dataset.n_sensors))
        for row, index in enumerate(indices):
            last = dataset.history_window(dataset.samples[index].origin_index, 1, 0)[0]
            out[row] = np.broadcast_to(last, (dataset.horizon, dataset.n_sensors))
        return out


class SeasonalNaiveForecaster(_NaiveForecaster):
    """Copies the values from one seasonal period (a week) earlier."""

    def __init__(self, period: int = SEASONAL_PERIOD):
        self.period = period

    def predict(self, dataset: SpotDataset, indices=None) -> np.ndarray:
        self._require_fitted()
        if dataset.horizon > self.period:
            raise WindowingError(
                f"seasonal naive with period {self.period} cannot fill a {dataset.horizon}-step horizon"
            )
        indices = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
        out = np.empty((len(indices), dataset.horizon, dataset.n_sensors))
        for row, index in enumerate(indices):
            origin = dataset.samples[index].origin_index
            out[row] = dataset.history_window(origin, self.period, self.period - dataset.horizon)
        return out


BASELINE_KINDS = {
    "cnn": CnnForecaster,
    "lstm": LstmForecaster,
    "cnn_lstm": CnnLstmForecaster,
    "seq2seq": Seq2SeqForecaster,
    "persistence": PersistenceForecaster,
    "seasonal": SeasonalNaiveForecaster,
}


def build_baseline(kind: str, **kwargs) -> BaseForecaster:
    """Instantiate a comparison model by name; unknown kinds are rejected."""
    try:
        factory = BASELINE_KINDS[kind]
    except KeyError:
        raise ConstructionError(f"unknown baseline kind {kind!r}; choose from {sorted(BASELINE_KINDS)}") from None
    return factory(**kwargs)
