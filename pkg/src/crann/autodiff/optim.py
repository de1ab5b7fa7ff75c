"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, TrainingError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """Apply one bias-corrected update in place; missing grads count as zero."""
    if lr <= 0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for path, param in params.items():
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        if not np.isfinite(grad).all():
            raise TrainingError(f"non-finite gradient for parameter '{path}'")
        if path not in state.m:
            state.m[path] = np.zeros_like(param.data)
            state.v[path] = np.zeros_like(param.data)
        state.m[path] = state.beta1 * state.m[path] + (1.0 - state.beta1) * grad
        state.v[path] = state.beta2 * state.v[path] + (1.0 - state.beta2) * grad * grad
        m_hat = state.m[path] / correction1
        v_hat = state.v[path] / correction2
        param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Stateful wrapper binding a parameter dict to an :class:`AdamState`."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = float(lr)
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None
