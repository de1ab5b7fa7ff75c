"""Central finite-difference oracle used by the gradient suites.

Kept deliberately independent of the autodiff engine: it only perturbs
raw numpy buffers and re-runs a black-box scalar evaluation.
"""

from __future__ import annotations

import numpy as np

REL_TOL = 1e-4
ABS_FLOOR = 1e-6


def numeric_grad(evaluate, arrays, eps: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``evaluate()`` w.r.t. each array, perturbed in place."""
    grads = []
    for arr in arrays:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            hi = float(evaluate())
            flat[i] = original - eps
            lo = float(evaluate())
            flat[i] = original
            grad_flat[i] = (hi - lo) / (2.0 * eps)
        grads.append(grad)
    return grads


def grads_close(analytic: np.ndarray, numeric: np.ndarray, rel: float = REL_TOL, floor: float = ABS_FLOOR) -> bool:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all(np.abs(analytic - numeric) <= floor + rel * scale))


def assert_grads_close(analytic, numeric, label: str = "") -> None:
    if not grads_close(analytic, numeric):
        diff = np.abs(np.asarray(analytic) - np.asarray(numeric))
        worst = float(diff.max())
        raise AssertionError(f"gradient mismatch {label}: max abs diff {worst:.3e}")
