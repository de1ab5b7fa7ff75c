"""Reverse-mode automatic differentiation over 64-bit numpy arrays.

Every forward operation builds one node of a dynamic graph: the output
tensor keeps references to its inputs plus a closure mapping the output
gradient to input gradients. The graph walked in reverse topological
order is the tape for a single backward pass; it is rebuilt from scratch
on every forward evaluation, which keeps long recurrent unrollings
simple and correct.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import ConstructionError, ContractError, DimensionError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (cheap inference)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """n-dimensional float64 array that can participate in backpropagation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._backward_done = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __pow__(self, exponent):
        return powc(self, exponent)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, length in enumerate(shape):
        if length == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def topological_tape(root: Tensor) -> list[Tensor]:
    """All graph nodes reachable from ``root``, inputs before outputs.

    This ordered record is the tape one backward pass replays in reverse.
    Iterative so that 300+-step recurrent chains do not hit the Python
    recursion limit.
    """
    order: list[Tensor] = []
    state: dict[int, int] = {}  # id -> 0 discovered, 1 finished
    stack = [root]
    while stack:
        node = stack[-1]
        status = state.get(id(node))
        if status is None:
            state[id(node)] = 0
            for parent in node._parents:
                if id(parent) not in state:
                    stack.append(parent)
        elif status == 0:
            state[id(node)] = 1
            order.append(node)
            stack.pop()
        else:
            stack.pop()
    return order


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every reachable ``requires_grad`` leaf.

    ``loss`` must be scalar. A second backward through the same graph is
    rejected; graphs are rebuilt per forward pass, not reset.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._backward_done:
        raise ContractError("backward() already ran on this graph; rebuild the forward pass first")
    loss._backward_done = True
    if not loss.requires_grad:
        return
    tape = topological_tape(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape):
        if node._backward is None or node.grad is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(node.grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.data)
            parent.grad += parent_grad


# -- elementwise primitives ------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(data, (a, b), grad_fn)


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _node(data, (a, b), grad_fn)


def powc(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    data = a.data**exponent

    def grad_fn(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _node(data, (a,), grad_fn)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)
    return _node(data, (a,), lambda g: (g * (1.0 - data * data),))


def sigmoid(a: Tensor) -> Tensor:
    # Overflow in exp(-x) saturates cleanly to 0/1, so only the warning is muted.
    with np.errstate(over="ignore"):
        data = 1.0 / (1.0 + np.exp(-a.data))
    return _node(data, (a,), lambda g: (g * data * (1.0 - data),))


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)
    return _node(data, (a,), lambda g: (g * (a.data > 0.0),))


def softmax(a: Tensor, axis: int) -> Tensor:
    """Max-stabilized softmax along ``axis``; slices sum to one."""
    if not -a.ndim <= axis < a.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    data = exp / exp.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - inner),)

    return _node(data, (a,), grad_fn)


# -- shape and indexing primitives ------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def getitem(a: Tensor, key) -> Tensor:
    data = a.data[key]
    basic = isinstance(key, (int, slice)) or (
        isinstance(key, tuple) and all(isinstance(k, (int, slice)) for k in key)
    )

    def grad_fn(g):
        out = np.zeros_like(a.data)
        if basic:
            out[key] += g
        else:
            np.add.at(out, key, g)
        return (out,)

    return _node(data, (a,), grad_fn)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        slicer = [slice(None)] * g.ndim
        pieces = []
        for start, stop in zip(offsets[:-1], offsets[1:]):
            slicer[axis] = slice(start, stop)
            pieces.append(g[tuple(slicer)])
        return tuple(pieces)

    return _node(data, tensors, grad_fn)


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    expanded = []
    for t in tensors:
        t = _lift(t)
        shape = list(t.data.shape)
        shape.insert(axis if axis >= 0 else t.ndim + 1 + axis, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis)


# -- reductions --------------------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    axes = range(a.ndim) if axis is None else np.atleast_1d(axis)
    axes = tuple(ax % a.ndim for ax in axes)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _node(data, (a,), grad_fn)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else np.prod([a.data.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / float(count)))


def mse(prediction: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all entries; shapes must match exactly."""
    target = _lift(target)
    if prediction.shape != target.shape:
        raise DimensionError(f"mse shapes differ: {prediction.shape} vs {target.shape}")
    diff = add(prediction, neg(target))
    return tensor_mean(mul(diff, diff))


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product; backward is dA = g Bᵀ, dB = Aᵀ g."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    data = a.data @ b.data

    def grad_fn(g):
        return g @ b.data.T, a.data.T @ g

    return _node(data, (a, b), grad_fn)


# -- convolution and grid scatter/gather -------------------------------------


def conv2d_same(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation with stride 1 and zero padding 1.

    ``x`` is [B, C, H, W], ``kernels`` [K, C, 3, 3], ``bias`` [K]; spatial
    dimensions are preserved.
    """
    if x.ndim != 4 or kernels.ndim != 4:
        raise DimensionError(f"conv2d_same needs 4-D input/kernels, got {x.shape} and {kernels.shape}")
    if kernels.shape[2:] != (3, 3):
        raise ConstructionError(f"conv2d_same supports 3x3 kernels only, got {kernels.shape[2:]}")
    if kernels.shape[1] != x.shape[1]:
        raise DimensionError(f"conv2d_same channel mismatch: input {x.shape[1]}, kernels {kernels.shape[1]}")
    if bias.shape != (kernels.shape[0],):
        raise DimensionError(f"conv2d_same bias shape {bias.shape} != ({kernels.shape[0]},)")
    batch, channels, height, width = x.shape
    k_out = kernels.shape[0]
    padded = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # patches[b, c*9+o, h*W+w] = padded neighborhood value at offset o
    shots = [
        padded[:, :, di : di + height, dj : dj + width] for di in range(3) for dj in range(3)
    ]
    patches = np.stack(shots, axis=2).reshape(batch, channels * 9, height * width)
    kmat = kernels.data.reshape(k_out, channels * 9)
    out = np.matmul(kmat, patches) + bias.data[:, None]

    def grad_fn(g):
        gmat = g.reshape(batch, k_out, height * width)
        grad_bias = gmat.sum(axis=(0, 2))
        grad_kernels = np.matmul(gmat, patches.transpose(0, 2, 1)).sum(axis=0)
        grad_patches = np.matmul(kmat.T, gmat)  # [B, C*9, H*W]
        grad_patches = grad_patches.reshape(batch, channels, 9, height, width)
        grad_padded = np.zeros_like(padded)
        for offset in range(9):
            di, dj = divmod(offset, 3)
            grad_padded[:, :, di : di + height, dj : dj + width] += grad_patches[:, :, offset]
        grad_x = grad_padded[:, :, 1 : height + 1, 1 : width + 1]
        return grad_x, grad_kernels.reshape(kernels.data.shape), grad_bias

    return _node(out.reshape(batch, k_out, height, width), (x, kernels, bias), grad_fn)


def scatter_grid(x: Tensor, grid_shape: tuple[int, int], rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Place per-sensor channels ``x`` [..., S] onto a zero grid [..., H, W]."""
    if x.shape[-1] != len(rows):
        raise DimensionError(f"scatter_grid got {x.shape[-1]} series for {len(rows)} grid slots")
    height, width = grid_shape
    data = np.zeros(x.shape[:-1] + (height, width), dtype=np.float64)
    data[..., rows, cols] = x.data

    def grad_fn(g):
        return (g[..., rows, cols],)

    return _node(data, (x,), grad_fn)


def gather_grid(grid: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Read sensor cells back out of a grid [..., H, W] into [..., S]."""
    data = grid.data[..., rows, cols]

    def grad_fn(g):
        out = np.zeros_like(grid.data)
        out[..., rows, cols] = g  # injective mapping, no accumulation needed
        return (out,)

    return _node(data, (grid,), grad_fn)
