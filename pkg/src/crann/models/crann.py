"""The full forecaster: temporal and spatial branches fused by a dense layer.

The dense stage sees, in a fixed persisted order, the temporal branch's
zone-mean forecast, the spatial branch's per-sensor forecast, the four
most recent observed values per sensor, and the horizon-aligned weather
block; one affine layer maps that feature vector to the [horizon x S]
prediction.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Linear, Module, Tensor, concat, reshape
from ..dataset import AR_LAGS, Batch, SpotDataset
from ..errors import DimensionError, NumericError
from ..rng import substream
from .base import BaseForecaster
from .spatial import SpatialModule, build_grid
from .temporal import TemporalModule


def assemble_features(mean_forecast: Tensor, spatial_forecast: Tensor, ar_terms: Tensor, exog: Tensor) -> Tensor:
    """Concatenate the dense-stage inputs in the persisted order.

    Order (row-major within blocks): [zone-mean forecast | spatial
    forecast | autoregressive terms | exogenous block]. Checkpoints
    depend on this layout.
    """
    batch = mean_forecast.shape[0]
    blocks = [mean_forecast, spatial_forecast, ar_terms, exog]
    for block in blocks[1:]:
        if block.ndim != 3 or block.shape[0] != batch:
            raise DimensionError(f"feature block {block.shape} inconsistent with batch {batch}")
    flat = [mean_forecast] + [reshape(b, (batch, b.shape[1] * b.shape[2])) for b in blocks[1:]]
    return concat(flat, axis=1)


def feature_length(horizon: int, n_sensors: int, n_exog: int) -> int:
    return horizon + horizon * n_sensors + AR_LAGS * n_sensors + horizon * n_exog


class CrannNetwork(Module):
    """Parameter container wiring the two branches into the dense layer."""

    def __init__(self, lookback, horizon, n_sensors, n_exog, hidden_size, attention_size,
                 conv_channels, grid, contraction, seed):
        super().__init__()
        self.temporal = TemporalModule(
            lookback, horizon, hidden_size, attention_size, substream(seed, "init", "temporal")
        )
        self.spatial = SpatialModule(
            horizon, grid, conv_channels, substream(seed, "init", "spatial"), contraction
        )
        self.dense = Linear(
            feature_length(horizon, n_sensors, n_exog), horizon * n_sensors,
            substream(seed, "init", "dense"),
        )


class CrannForecaster(BaseForecaster):
    """Estimator for the combined convolutional-recurrent attention network.

    Hyperparameters mirror the reference configuration: one encoder and
    one decoder layer with 100 hidden units, five 64-channel convolutions,
    and a single dense layer.
    """

    def __init__(
        self,
        hidden_size: int = 100,
        attention_size: int = 100,
        conv_channels: tuple[int, ...] = (64, 64, 64, 64, 64),
        grid_layout: str = "square",
        spatial_contraction: str = "per_lag",
        teacher_forcing: bool = False,
        seed: int = 0,
    ):
        self.hidden_size = hidden_size
        self.attention_size = attention_size
        self.conv_channels = conv_channels
        self.grid_layout = grid_layout
        self.spatial_contraction = spatial_contraction
        self.teacher_forcing = teacher_forcing
        self.seed = seed

    def _build(self, dataset: SpotDataset) -> None:
        grid = build_grid(
            dataset.panel.sensor_ids, coords=dataset.panel.sensor_coords, layout=self.grid_layout
        )
        self.grid_ = grid
        self.network_ = CrannNetwork(
            lookback=dataset.lookback,
            horizon=dataset.horizon,
            n_sensors=dataset.n_sensors,
            n_exog=dataset.weather.shape[1],
            hidden_size=self.hidden_size,
            attention_size=self.attention_size,
            conv_channels=tuple(self.conv_channels),
            grid=grid,
            contraction=self.spatial_contraction,
            seed=self.seed,
        )
        self.built_ = True

    @property
    def network(self) -> CrannNetwork:
        return self.network_

    def forward_full(self, batch: Batch) -> tuple[Tensor, Tensor, Tensor]:
        """Prediction plus both attention maps for a batch."""
        net = self.network_
        zone_target = batch.target.mean(axis=2) if self.teacher_forcing else None
        mean_forecast, temporal_attention = net.temporal.forecast(
            Tensor(batch.temporal), targets=zone_target,
            teacher_forcing=self.teacher_forcing and net.temporal.training,
        )
        spatial_forecast, spatial_attention = net.spatial.forward(Tensor(batch.spatial))
        features = assemble_features(
            mean_forecast, spatial_forecast, Tensor(batch.ar), Tensor(batch.exog)
        )
        flat = net.dense(features)
        horizon, n_sensors = batch.target.shape[1], batch.target.shape[2]
        prediction = reshape(flat, (len(batch), horizon, n_sensors))
        if not np.isfinite(prediction.data).all():
            raise NumericError("fused prediction contains non-finite values")
        return prediction, temporal_attention, spatial_attention

    def forward(self, batch: Batch) -> Tensor:
        return self.forward_full(batch)[0]

    def describe(self) -> dict:
        base = super().describe()
        net = self.network_
        base.update(
            {
                "conv_channels": list(self.conv_channels),
                "lstm_layers": 1,
                "hidden_units": self.hidden_size,
                "dense_layers": 1,
                "branch_parameters": {
                    "temporal": net.temporal.parameter_count(),
                    "spatial": net.spatial.parameter_count(),
                    "dense": net.dense.parameter_count(),
                },
            }
        )
        return base
