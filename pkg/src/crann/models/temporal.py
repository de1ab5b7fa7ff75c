"""Encoder-decoder LSTM with additive attention over the zone-mean series.

The encoder consumes the long lookback one value per step; the decoder
runs autoregressively for the forecast horizon, scoring each encoder
state against its current hidden state through a small feedforward net,
softmax-normalizing the scores into attention weights, and predicting
from the concatenated context vector and hidden state.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    LSTM,
    Linear,
    Module,
    Tensor,
    concat,
    matmul,
    mul,
    no_grad,
    reshape,
    softmax,
    stack,
    tanh,
    tensor_sum,
)
from ..autodiff.layers import xavier_array
from ..errors import DimensionError, NumericError
from ..rng import as_generator


def attention_context(weights: Tensor, states: Tensor) -> Tensor:
    """Weighted sum of encoder states: [B, N] x [B, N, H] -> [B, H]."""
    if weights.ndim == 1:
        weights = reshape(weights, (1,) + weights.shape)
    if states.ndim == 2:
        states = reshape(states, (1,) + states.shape)
    if weights.shape[-1] != states.shape[-2]:
        raise DimensionError(
            f"{weights.shape[-1]} attention weights cannot combine {states.shape[-2]} states"
        )
    expanded = reshape(weights, weights.shape + (1,))
    return tensor_sum(mul(expanded, states), axis=-2)


class TemporalModule(Module):
    """Zone-mean forecaster: lookback values in, horizon values out."""

    def __init__(self, lookback: int, horizon: int, hidden_size: int, attention_size: int, rng):
        super().__init__()
        rng = as_generator(rng, "temporal")
        self.lookback = int(lookback)
        self.horizon = int(horizon)
        self.hidden_size = int(hidden_size)
        self.attention_size = int(attention_size)
        self.encoder = LSTM(1, hidden_size, rng)
        self.decoder = LSTM(1, hidden_size, rng)
        # additive attention: score = v . tanh(Wd h_dec + We s_enc)
        self.attn_decoder = Tensor(
            xavier_array((attention_size, hidden_size), rng).T.copy(), requires_grad=True
        )
        self.attn_encoder = Tensor(
            xavier_array((attention_size, hidden_size), rng).T.copy(), requires_grad=True
        )
        self.attn_score = Tensor(xavier_array((1, attention_size), rng).T.copy(), requires_grad=True)
        self.head = Linear(2 * hidden_size, 1, rng)

    # -- pieces -----------------------------------------------------------
    @staticmethod
    def _promote(series) -> Tensor:
        tensor = series if isinstance(series, Tensor) else Tensor(series)
        if tensor.ndim == 1:
            tensor = reshape(tensor, (1, tensor.shape[0]))
        return tensor

    def encode(self, series) -> tuple[Tensor, tuple[Tensor, Tensor]]:
        """Run the encoder over [B, lookback]; returns states [B, lookback, H]."""
        series = self._promote(series)
        if series.shape[1] != self.lookback:
            raise DimensionError(f"encoder expects {self.lookback} steps, got {series.shape[1]}")
        batch = series.shape[0]
        h, c = self.encoder.initial_state(batch)
        states = []
        for step in range(self.lookback):
            h, c = self.encoder.step(series[:, step : step + 1], (h, c))
            states.append(h)
        return stack(states, axis=1), (h, c)

    def _project_states(self, states: Tensor) -> Tensor:
        batch, length, hidden = states.shape
        flat = reshape(states, (batch * length, hidden))
        return reshape(matmul(flat, self.attn_encoder), (batch, length, self.attention_size))

    def _scores(self, hidden: Tensor, projected: Tensor) -> Tensor:
        batch, length, _ = projected.shape
        query = matmul(hidden, self.attn_decoder)  # [B, A]
        combined = tanh(projected + reshape(query, (batch, 1, self.attention_size)))
        flat = matmul(reshape(combined, (batch * length, self.attention_size)), self.attn_score)
        return softmax(reshape(flat, (batch, length)), axis=1)

    def attention_scores(self, hidden: Tensor, states: Tensor) -> Tensor:
        """Attention weights [B, N] of a decoder state against encoder states."""
        if hidden.ndim == 1:
            hidden = reshape(hidden, (1, hidden.shape[0]))
        if states.ndim == 2:
            states = reshape(states, (1,) + states.shape)
        return self._scores(hidden, self._project_states(states))

    # -- full pass ----------------------------------------------------------
    def forecast(self, series, targets=None, teacher_forcing: bool = False) -> tuple[Tensor, Tensor]:
        """Autoregressive decoding; returns ([B, horizon], [B, horizon, lookback]).

        The decoder starts from the encoder's final state and consumes its
        previous prediction (the last input value at step 0); with
        ``teacher_forcing`` it consumes the true previous target instead.
        """
        series = self._promote(series)
        states, (h, c) = self.encode(series)
        projected = self._project_states(states)
        previous = series[:, self.lookback - 1 : self.lookback]
        predictions = []
        attention_rows = []
        for step in range(self.horizon):
            h, c = self.decoder.step(previous, (h, c))
            weights = self._scores(h, projected)
            context = attention_context(weights, states)
            prediction = self.head(concat([context, h], axis=1))
            if not np.isfinite(prediction.data).all():
                raise NumericError(f"temporal forecast produced non-finite values at step {step}")
            predictions.append(prediction)
            attention_rows.append(weights)
            if teacher_forcing and targets is not None:
                previous = Tensor(np.asarray(targets)[:, step : step + 1])
            else:
                previous = prediction
        return concat(predictions, axis=1), stack(attention_rows, axis=1)

    def attention_map(self, series) -> np.ndarray:
        """Evaluation-mode attention map [horizon, lookback] for one series."""
        with no_grad():
            _, attention = self.forecast(series)
        return attention.data[0]
