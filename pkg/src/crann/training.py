"""Mini-batch Adam training loop with early stopping and learning-rate decay.

The loop is generic: a model only needs ``parameters()``,
``training_loss(batch)``, ``set_training(flag)`` and (optionally)
``needs_full_history``; batches come from ``dataset.batch(indices, ...)``
and expose ``len()``. That keeps the same loop usable for the full
forecaster, the baselines and plain regression heads in tests.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Adam, backward, no_grad
from .errors import ContractError, TrainingError
from .metrics import MetricResult, pool_samples
from .rng import substream


@dataclass
class TrainConfig:
    """Optimization constants; batch size and initial rate follow the protocol."""

    batch_size: int = 64
    lr: float = 0.01
    max_epochs: int = 200
    patience: int = 10
    lr_decay: float = 0.5
    seed: int = 0
    max_train_samples: int | None = None
    pretrain_epochs: int = 0
    freeze_pretrained: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.lr_decay < 1.0:
            raise ContractError(f"lr_decay must be in (0, 1), got {self.lr_decay}")
        if self.lr <= 0:
            raise ContractError(f"lr must be positive, got {self.lr}")
        if self.max_epochs < 1:
            raise ContractError(f"max_epochs must be >= 1, got {self.max_epochs}")


@dataclass
class TrainReport:
    """Loss curves plus stopping bookkeeping for one training run."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    best_val_loss: float = float("inf")
    final_lr: float = 0.0
    n_train: int = 0
    n_validation: int = 0
    wall_seconds: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
            "best_val_loss": self.best_val_loss,
            "final_lr": self.final_lr,
            "n_train": self.n_train,
            "n_validation": self.n_validation,
            "wall_seconds": self.wall_seconds,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2))


def _subsample(indices: np.ndarray, limit: int | None) -> np.ndarray:
    if limit is None or len(indices) <= limit:
        return indices
    picks = np.linspace(0, len(indices) - 1, limit).round().astype(np.int64)
    return indices[np.unique(picks)]


def _batches(indices: np.ndarray, batch_size: int, rng: np.random.Generator | None):
    order = indices if rng is None else indices[rng.permutation(len(indices))]
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        # a single leftover sample would break batch statistics; drop it
        if len(chunk) == 1 and len(order) > 1:
            continue
        yield chunk


def _validation_loss(model, dataset, indices: np.ndarray, batch_size: int) -> float:
    model.set_training(False)
    total, weight = 0.0, 0
    with no_grad():
        for chunk in _batches(indices, batch_size, rng=None):
            batch = dataset.batch(chunk, include_full_history=getattr(model, "needs_full_history", False))
            total += model.training_loss(batch).item() * len(batch)
            weight += len(batch)
    model.set_training(True)
    return total / weight


def train(model, dataset, train_indices, validation_indices, cfg: TrainConfig) -> TrainReport:
    """Optimize ``model`` in place and return the loss curves.

    Early stopping restores the best-validation parameters (and layer
    buffers); the learning rate is halved by ``lr_decay`` every
    ``patience // 2`` consecutive epochs without improvement. Two runs
    with the same config and seed produce bit-identical parameters.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    validation_indices = np.asarray(validation_indices, dtype=np.int64)
    if train_indices.size == 0 or validation_indices.size == 0:
        raise ContractError("training needs non-empty train and validation index sets")
    train_indices = _subsample(train_indices, cfg.max_train_samples)

    started = time.perf_counter()
    params = model.parameters()
    buffers = model.network.buffers() if hasattr(model, "network") else {}
    optimizer = Adam(params, lr=cfg.lr)
    shuffle_rng = substream(cfg.seed, "train", "shuffle")
    report = TrainReport(n_train=len(train_indices), n_validation=len(validation_indices))

    best_params: dict[str, np.ndarray] = {}
    best_buffers: dict[str, np.ndarray] = {}
    no_improve = 0
    decay_every = max(1, cfg.patience // 2)
    needs_history = getattr(model, "needs_full_history", False)

    for epoch in range(1, cfg.max_epochs + 1):
        model.set_training(True)
        epoch_loss, weight = 0.0, 0
        for chunk in _batches(train_indices, cfg.batch_size, shuffle_rng):
            batch = dataset.batch(chunk, include_full_history=needs_history)
            optimizer.zero_grad()
            loss = model.training_loss(batch)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"training diverged (non-finite loss) at epoch {epoch}")
            backward(loss)
            optimizer.step()
            epoch_loss += value * len(batch)
            weight += len(batch)
        report.train_losses.append(epoch_loss / weight)

        val_loss = _validation_loss(model, dataset, validation_indices, cfg.batch_size)
        report.val_losses.append(val_loss)

        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_params = {path: tensor.data.copy() for path, tensor in params.items()}
            best_buffers = {path: array.copy() for path, array in buffers.items()}
            no_improve = 0
        else:
            no_improve += 1
            if no_improve % decay_every == 0:
                optimizer.lr *= cfg.lr_decay

        report.stopped_epoch = epoch
        if no_improve >= cfg.patience:
            break

    if best_params:
        for path, tensor in params.items():
            tensor.data = best_params[path]
        for path, array in buffers.items():
            array[...] = best_buffers[path]
    report.final_lr = optimizer.lr
    report.wall_seconds = time.perf_counter() - started
    return report


def evaluate(model, dataset, indices, denormalize: bool = True) -> MetricResult:
    """Pooled fold metrics; predictions are mapped back to vehicles/hour.

    Pooling concatenates every cell of every test sample before applying
    the metric formulas once.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ContractError("evaluation needs a non-empty index set")
    predictions = model.predict(dataset, indices)
    targets = np.stack([dataset.samples[i].target for i in indices])
    if denormalize:
        if dataset.params is None:
            raise ContractError("denormalized evaluation needs normalization constants")
        predictions = dataset.params.invert_traffic(predictions)
        targets = dataset.params.invert_traffic(targets)
    return pool_samples(list(predictions), list(targets))
