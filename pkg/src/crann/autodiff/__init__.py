"""Self-contained reverse-mode autodiff engine and neural building blocks."""

from .layers import (
    LSTM,
    BatchNorm2d,
    Conv2d,
    Linear,
    Module,
    lstm_cell,
    xavier_array,
    xavier_init,
)
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    backward,
    concat,
    conv2d_same,
    gather_grid,
    getitem,
    matmul,
    mse,
    mul,
    neg,
    no_grad,
    powc,
    relu,
    reshape,
    scatter_grid,
    sigmoid,
    softmax,
    stack,
    tanh,
    tensor_mean,
    tensor_sum,
    topological_tape,
)

__all__ = [
    "LSTM",
    "Adam",
    "AdamState",
    "BatchNorm2d",
    "Conv2d",
    "Linear",
    "Module",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "concat",
    "conv2d_same",
    "gather_grid",
    "getitem",
    "lstm_cell",
    "matmul",
    "mse",
    "mul",
    "neg",
    "no_grad",
    "powc",
    "relu",
    "reshape",
    "scatter_grid",
    "sigmoid",
    "softmax",
    "stack",
    "tanh",
    "tensor_mean",
    "tensor_sum",
    "topological_tape",
    "xavier_array",
    "xavier_init",
]
