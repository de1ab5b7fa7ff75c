"""CNN over sensor grids with a learnable spatio-temporal attention tensor.

Sensors are embedded on a small 2-D grid (one channel per input lag), run
through a convolution stack that preserves the input shape, and then
re-weighted: a learnable [T, S, S] tensor scores how much source sensor k
at lag i matters for predicting sensor j, the scores are softmax-
normalized over k, and the output is the attention-weighted sum of the
convolved activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    BatchNorm2d,
    Conv2d,
    Module,
    Tensor,
    gather_grid,
    mul,
    relu,
    reshape,
    scatter_grid,
    softmax,
    tensor_mean,
    tensor_sum,
)
from ..errors import ConstructionError, DimensionError
from ..rng import as_generator


@dataclass
class SensorGrid:
    """Injective sensor -> (row, col) embedding with a validity mask."""

    height: int
    width: int
    rows: np.ndarray  # [S]
    cols: np.ndarray  # [S]
    mask: np.ndarray  # [H, W] float, 1.0 on cells that host a sensor

    @property
    def n_sensors(self) -> int:
        return len(self.rows)

    @property
    def n_masked(self) -> int:
        return self.height * self.width - self.n_sensors


def build_grid(sensor_ids, coords: np.ndarray | None = None, layout: str = "square") -> SensorGrid:
    """Embed sensors on a near-square grid.

    ``square`` packs sensors row-major in id order onto a ceil(sqrt(S))
    grid; ``geographic`` orders rows north-to-south and columns west-to-
    east from the sensor coordinates. Unused cells are masked.
    """
    sensor_ids = list(sensor_ids)
    if len(set(sensor_ids)) != len(sensor_ids):
        raise ConstructionError("duplicate sensor ids in grid layout")
    n = len(sensor_ids)
    if n < 1:
        raise ConstructionError("grid needs at least one sensor")
    height = int(np.ceil(np.sqrt(n)))
    width = int(np.ceil(n / height))

    order = np.arange(n)
    if layout == "geographic":
        if coords is None:
            raise ConstructionError("geographic layout needs sensor coordinates")
        by_lat = np.argsort(-coords[:, 1], kind="stable")
        order = np.empty(n, dtype=np.int64)
        for row_number in range(height):
            chunk = by_lat[row_number * width : (row_number + 1) * width]
            order[row_number * width : row_number * width + len(chunk)] = chunk[
                np.argsort(coords[chunk, 0], kind="stable")
            ]
    elif layout != "square":
        raise ConstructionError(f"unknown grid layout {layout!r}")

    rows = np.empty(n, dtype=np.int64)
    cols = np.empty(n, dtype=np.int64)
    slots = np.argsort(order, kind="stable")  # sensor index -> its slot position
    rows[:] = slots // width
    cols[:] = slots % width
    mask = np.zeros((height, width))
    mask[rows, cols] = 1.0
    return SensorGrid(height=height, width=width, rows=rows, cols=cols, mask=mask)


def st_attention(x_conv: Tensor, attention_tensor: Tensor) -> Tensor:
    """Normalized attention [.., T, S, S] from activations and the raw tensor.

    The activation of source sensor k at lag i modulates the learnable
    score for every target j; softmax over k puts each (i, j) slice on the
    simplex.
    """
    if isinstance(x_conv, np.ndarray):
        x_conv = Tensor(x_conv)
    batched = x_conv.ndim == 3
    if not batched:
        x_conv = reshape(x_conv, (1,) + x_conv.shape)
    lags, n_sensors = x_conv.shape[1], x_conv.shape[2]
    if attention_tensor.shape != (lags, n_sensors, n_sensors):
        raise DimensionError(
            f"attention tensor {attention_tensor.shape} does not match activations "
            f"[{lags} x {n_sensors}]"
        )
    sources = reshape(x_conv, (x_conv.shape[0], lags, 1, n_sensors))
    scores = mul(sources, attention_tensor)
    weights = softmax(scores, axis=3)
    return weights if batched else weights[0]


def attend_output(weights: Tensor, x_conv: Tensor) -> Tensor:
    """Contract attention against activations: out[i, j] = sum_k a[i,j,k] x[i,k]."""
    if isinstance(x_conv, np.ndarray):
        x_conv = Tensor(x_conv)
    batched = x_conv.ndim == 3
    if not batched:
        x_conv = reshape(x_conv, (1,) + x_conv.shape)
        weights = reshape(weights, (1,) + weights.shape)
    lags, n_sensors = x_conv.shape[1], x_conv.shape[2]
    if weights.shape != (x_conv.shape[0], lags, n_sensors, n_sensors):
        raise DimensionError(f"weights {weights.shape} do not match activations {x_conv.shape}")
    sources = reshape(x_conv, (x_conv.shape[0], lags, 1, n_sensors))
    out = tensor_sum(mul(weights, sources), axis=3)
    return out if batched else out[0]


class ConvStack(Module):
    """Shape-preserving stack: (conv 3x3 -> batch norm -> ReLU) x N -> conv 3x3.

    Masked grid cells are forced back to zero after every layer, so cells
    without a sensor can never leak information into gathered outputs.
    """

    def __init__(self, in_channels: int, widths: tuple[int, ...], grid: SensorGrid, rng):
        super().__init__()
        self.grid = grid
        self._mask = Tensor(grid.mask.reshape(1, 1, grid.height, grid.width))
        self.convs = []
        self.norms = []
        previous = in_channels
        for width in widths:
            self.convs.append(Conv2d(previous, width, rng))
            self.norms.append(BatchNorm2d(width))
            previous = width
        self.projection = Conv2d(previous, in_channels, rng)

    def __call__(self, grid_input: Tensor) -> Tensor:
        out = mul(grid_input, self._mask)
        for conv, norm in zip(self.convs, self.norms):
            out = mul(relu(norm(conv(out))), self._mask)
        return mul(self.projection(out), self._mask)


class SpatialModule(Module):
    """Per-sensor forecaster: [B, T, S] history in, [B, T, S] prediction out."""

    def __init__(
        self,
        horizon: int,
        grid: SensorGrid,
        conv_channels: tuple[int, ...] = (64, 64, 64, 64, 64),
        rng=0,
        contraction: str = "per_lag",
    ):
        super().__init__()
        if contraction not in ("per_lag", "pooled"):
            raise ConstructionError(f"unknown contraction mode {contraction!r}")
        rng = as_generator(rng, "spatial")
        self.horizon = int(horizon)
        self.grid = grid
        self.contraction = contraction
        self.stack = ConvStack(horizon, tuple(conv_channels), grid, rng)
        # zero start = exactly uniform attention, a symmetric, interpretable origin
        self.attention_tensor = Tensor(
            np.zeros((horizon, grid.n_sensors, grid.n_sensors)), requires_grad=True
        )

    def conv_forward(self, x: Tensor) -> Tensor:
        """Scatter onto the grid, convolve, gather back to [B, T, S]."""
        if isinstance(x, np.ndarray):
            x = Tensor(x)
        if x.ndim == 2:
            x = reshape(x, (1,) + x.shape)
        if x.shape[1] != self.horizon or x.shape[2] != self.grid.n_sensors:
            raise DimensionError(
                f"spatial input {x.shape[1:]} does not match [{self.horizon} x {self.grid.n_sensors}]"
            )
        grid_input = scatter_grid(x, (self.grid.height, self.grid.width), self.grid.rows, self.grid.cols)
        return gather_grid(self.stack(grid_input), self.grid.rows, self.grid.cols)

    def forward(self, x) -> tuple[Tensor, Tensor]:
        """Returns (prediction [B, T, S], attention weights [B, T, S, S])."""
        x_conv = self.conv_forward(x)
        weights = st_attention(x_conv, self.attention_tensor)
        out = attend_output(weights, x_conv)
        if self.contraction == "pooled":
            pooled = tensor_mean(out, axis=1, keepdims=True)
            out = pooled + Tensor(np.zeros((1, self.horizon, 1)))
        return out, weights
