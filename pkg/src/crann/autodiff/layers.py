"""Neural layer building blocks on top of the tensor graph.

Layers are thin parameter containers; forward logic stays functional so
the recurrences unroll naturally onto the tape.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConstructionError, ContractError, DimensionError
from ..rng import as_generator
from .tensor import Tensor, concat, conv2d_same, matmul, mul, powc, sigmoid, tanh, tensor_mean


def xavier_array(shape: tuple[int, ...], rng) -> np.ndarray:
    """Glorot-uniform draw; ``shape`` reads (fan_out, fan_in, *receptive)."""
    shape = tuple(int(s) for s in shape)
    if len(shape) < 2:
        raise ContractError(f"xavier init needs at least 2 dimensions, got {shape}")
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    fan_out = shape[0] * receptive
    fan_in = shape[1] * receptive
    if fan_in == 0 or fan_out == 0:
        raise ContractError(f"xavier init with zero fan: shape {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return as_generator(rng, "xavier").uniform(-bound, bound, size=shape)


def xavier_init(shape: tuple[int, ...], seed) -> Tensor:
    """Glorot-uniform parameter tensor; deterministic for a fixed seed."""
    return Tensor(xavier_array(shape, seed), requires_grad=True)


class Module:
    """Minimal parameter container with stable dotted paths.

    Parameters are discovered by walking instance attributes in definition
    order, so checkpoint paths stay deterministic.
    """

    def __init__(self):
        self.training = True

    def parameters(self) -> dict[str, Tensor]:
        found: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                found[name] = value
            elif isinstance(value, Module):
                for key, tensor in value.parameters().items():
                    found[f"{name}.{key}"] = tensor
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        for key, tensor in item.parameters().items():
                            found[f"{name}.{index}.{key}"] = tensor
        return found

    def buffers(self) -> dict[str, np.ndarray]:
        found: dict[str, np.ndarray] = {}
        for name, value in vars(self).items():
            if isinstance(value, Module):
                for key, arr in value.buffers().items():
                    found[f"{name}.{key}"] = arr
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        for key, arr in item.buffers().items():
                            found[f"{name}.{index}.{key}"] = arr
        found.update(getattr(self, "_buffers", {}))
        return found

    def set_training(self, flag: bool) -> None:
        self.training = bool(flag)
        for value in vars(self).values():
            if isinstance(value, Module):
                value.set_training(flag)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.set_training(flag)

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())


class Linear(Module):
    """Affine map [in_features -> out_features] applied to [B, in_features]."""

    def __init__(self, in_features: int, out_features: int, rng, bias: bool = True):
        super().__init__()
        # Stored [in, out] for a transpose-free x @ W; initialized per the
        # (fan_out, fan_in) convention.
        self.weight = Tensor(xavier_array((out_features, in_features), rng).T.copy(), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = matmul(x, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, weight: Tensor, bias: Tensor) -> tuple[Tensor, Tensor]:
    """One step of the four-gate recurrence (sigmoid gates, tanh candidate).

    ``weight`` is [in+hidden, 4*hidden] with gate order (input, forget,
    candidate, output); ``x`` [B, in], ``h``/``c`` [B, hidden].
    """
    hidden = h.shape[-1]
    if c.shape[-1] != hidden or weight.shape != (x.shape[-1] + hidden, 4 * hidden):
        raise DimensionError(
            f"lstm_cell size mismatch: x {x.shape}, h {h.shape}, c {c.shape}, weight {weight.shape}"
        )
    gates = matmul(concat([x, h], axis=1), weight) + bias
    i = sigmoid(gates[:, 0 * hidden : 1 * hidden])
    f = sigmoid(gates[:, 1 * hidden : 2 * hidden])
    g = tanh(gates[:, 2 * hidden : 3 * hidden])
    o = sigmoid(gates[:, 3 * hidden : 4 * hidden])
    c_new = f * c + i * g
    h_new = o * tanh(c_new)
    return h_new, c_new


class LSTM(Module):
    """Single recurrent layer; multi-layer stacks are lists of these."""

    def __init__(self, input_size: int, hidden_size: int, rng):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.weight = Tensor(
            xavier_array((4 * hidden_size, input_size + hidden_size), rng).T.copy(), requires_grad=True
        )
        self.bias = Tensor(np.zeros(4 * hidden_size), requires_grad=True)

    def initial_state(self, batch: int) -> tuple[Tensor, Tensor]:
        zeros = np.zeros((batch, self.hidden_size))
        return Tensor(zeros), Tensor(zeros.copy())

    def step(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        return lstm_cell(x, state[0], state[1], self.weight, self.bias)


class Conv2d(Module):
    """3x3 same-padding convolution layer; other kernel sizes are rejected."""

    def __init__(self, in_channels: int, out_channels: int, rng, kernel_size: int = 3):
        super().__init__()
        if kernel_size != 3:
            raise ConstructionError(f"convolutions use 3x3 kernels, got kernel_size={kernel_size}")
        self.kernels = Tensor(
            xavier_array((out_channels, in_channels, 3, 3), rng), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d_same(x, self.kernels, self.bias)


class BatchNorm2d(Module):
    """Per-channel batch normalization for [B, C, H, W] inputs.

    Batch statistics are used while training and folded into running
    estimates (momentum 0.1); evaluation normalizes with the running
    values. Epsilon 1e-5.
    """

    MOMENTUM = 0.1
    EPS = 1e-5

    def __init__(self, channels: int):
        super().__init__()
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self._buffers = {
            "running_mean": np.zeros(channels),
            "running_var": np.ones(channels),
        }

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4:
            raise DimensionError(f"batch norm expects [B, C, H, W], got {x.shape}")
        axes = (0, 2, 3)
        spread_shape = (1, x.shape[1], 1, 1)
        if self.training:
            mean = tensor_mean(x, axis=axes, keepdims=True)
            centered = x + (-1.0) * mean
            var = tensor_mean(mul(centered, centered), axis=axes, keepdims=True)
            # in-place so externally held buffer references stay valid
            self._buffers["running_mean"] *= 1 - self.MOMENTUM
            self._buffers["running_mean"] += self.MOMENTUM * mean.data.reshape(-1)
            self._buffers["running_var"] *= 1 - self.MOMENTUM
            self._buffers["running_var"] += self.MOMENTUM * var.data.reshape(-1)
            inv = powc(var + self.EPS, -0.5)
            normalized = mul(centered, inv)
        else:
            mean = self._buffers["running_mean"].reshape(spread_shape)
            scale = 1.0 / np.sqrt(self._buffers["running_var"].reshape(spread_shape) + self.EPS)
            normalized = mul(x + Tensor(-mean), Tensor(scale))
        gamma = self.gamma.reshape(spread_shape)
        beta = self.beta.reshape(spread_shape)
        return mul(normalized, gamma) + beta
