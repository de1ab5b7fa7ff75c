"""Blocked k-fold cross-validation plans with dependency gaps.

Samples are windows over one series, so neighbouring origins share data.
Each fold takes a contiguous test block, a validation block directly
next to it, and keeps for training only the origins farther than ``gap``
hours from both blocks. Test blocks partition the origins, so no origin
is tested twice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import PlanningError

DEFAULT_GAP = 336 + 24  # largest lookback+horizon across all compared models


@dataclass
class Fold:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


@dataclass
class FoldPlan:
    n_samples: int
    k: int
    gap: int
    folds: list[Fold]

    def verify_gaps(self) -> None:
        """Exhaustive pairwise check of the dependency-gap constraint."""
        for number, fold in enumerate(self.folds):
            for origin in fold.test:
                near_train = np.abs(fold.train - origin) <= self.gap
                if near_train.any():
                    raise PlanningError(f"fold {number}: train origin within gap of test origin {origin}")
            for origin in fold.validation:
                near_train = np.abs(fold.train - origin) <= self.gap
                if near_train.any():
                    raise PlanningError(f"fold {number}: train origin within gap of validation origin {origin}")

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "k": self.k,
            "gap": self.gap,
            "folds": [
                {
                    "train": fold.train.tolist(),
                    "validation": fold.validation.tolist(),
                    "test": fold.test.tolist(),
                }
                for fold in self.folds
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "FoldPlan":
        return cls(
            n_samples=int(payload["n_samples"]),
            k=int(payload["k"]),
            gap=int(payload["gap"]),
            folds=[
                Fold(
                    train=np.asarray(fold["train"], dtype=np.int64),
                    validation=np.asarray(fold["validation"], dtype=np.int64),
                    test=np.asarray(fold["test"], dtype=np.int64),
                )
                for fold in payload["folds"]
            ],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "FoldPlan":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def blocked_kfold(n_samples: int, k: int = 10, gap: int = DEFAULT_GAP, val_fraction: float = 1.0) -> FoldPlan:
    """Plan ``k`` folds over ``n_samples`` origins.

    The validation block sits immediately before the test block (after it
    for the first fold) and is sized ``val_fraction`` of the test block.
    Origins within ``gap`` of either block are dropped from training, so
    |test - train| > gap and |validation - train| > gap hold pairwise.
    """
    n_samples, k, gap = int(n_samples), int(k), int(gap)
    if k < 1 or gap < 0 or not 0.0 <= val_fraction:
        raise PlanningError(f"invalid plan request: k={k}, gap={gap}, val_fraction={val_fraction}")
    if n_samples < k * (gap + 1):
        raise PlanningError(
            f"{n_samples} samples cannot support {k} folds with gap {gap} "
            f"(need at least {k * (gap + 1)})"
        )
    origins = np.arange(n_samples, dtype=np.int64)
    block_sizes = np.full(k, n_samples // k, dtype=np.int64)
    block_sizes[: n_samples % k] += 1
    boundaries = np.concatenate([[0], np.cumsum(block_sizes)])

    folds: list[Fold] = []
    for number in range(k):
        test_start, test_stop = int(boundaries[number]), int(boundaries[number + 1])
        val_size = int(round(val_fraction * (test_stop - test_start)))
        if test_start - val_size >= 0:
            val_start, val_stop = test_start - val_size, test_start
        else:
            val_start, val_stop = test_stop, min(n_samples, test_stop + val_size)
        blocked_lo = min(test_start, val_start) - gap
        blocked_hi = max(test_stop, val_stop) + gap
        train_mask = (origins < blocked_lo) | (origins >= blocked_hi)
        folds.append(
            Fold(
                train=origins[train_mask],
                validation=origins[val_start:val_stop],
                test=origins[test_start:test_stop],
            )
        )
    plan = FoldPlan(n_samples=n_samples, k=k, gap=gap, folds=folds)
    plan.verify_gaps()
    return plan


def train_row_mask(train_origins: np.ndarray, lookback: int, horizon: int, n_rows: int) -> np.ndarray:
    """Panel rows touched by the training samples' full windows.

    These rows (history plus target block of every training origin) are
    what normalization constants may legally be fitted on.
    """
    mask = np.zeros(n_rows, dtype=bool)
    for origin in np.asarray(train_origins, dtype=np.int64):
        mask[origin - lookback : origin + horizon] = True
    return np.flatnonzero(mask)
