"""Estimator base class shared by the forecaster and all baselines.

Models follow the scikit-learn idiom: hyperparameters live on ``__init__``
(picked up by ``get_params``/``set_params``), fitted state lands in
trailing-underscore attributes, ``fit`` returns ``self`` and ``predict``
refuses to run before ``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..autodiff import Module, Tensor, mse, no_grad
from ..dataset import Batch, SpotDataset
from ..errors import ContractError, NumericError


def check_indices(indices, n_samples: int, label: str) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= n_samples):
        raise ContractError(f"{label} indices out of range for {n_samples} samples")
    return indices


def check_batch_shapes(batch: Batch, horizon: int, n_sensors: int) -> None:
    if batch.spatial.shape[1:] != (horizon, n_sensors):
        raise ContractError(
            f"batch spatial block is {batch.spatial.shape[1:]}, expected ({horizon}, {n_sensors})"
        )


class BaseForecaster(BaseEstimator):
    """Common fit/predict machinery over :class:`SpotDataset` samples."""

    #: recurrent baselines need the per-sensor lookback matrix in each batch
    needs_full_history = False

    PREDICT_BATCH = 256

    # -- subclass surface --------------------------------------------------
    def _build(self, dataset: SpotDataset) -> None:
        raise NotImplementedError

    def forward(self, batch: Batch) -> Tensor:
        """Normalized predictions [B, horizon, S] for a batch."""
        raise NotImplementedError

    @property
    def network(self) -> Module:
        raise NotImplementedError

    # -- shared machinery ----------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        return self.network.parameters()

    def set_training(self, flag: bool) -> None:
        self.network.set_training(flag)

    def training_loss(self, batch: Batch) -> Tensor:
        prediction = self.forward(batch)
        return mse(prediction, Tensor(batch.target))

    def fit(self, dataset: SpotDataset, train_indices, validation_indices, config=None):
        from ..training import TrainConfig, train

        config = config if config is not None else TrainConfig()
        self._build(dataset)
        self.n_sensors_ = dataset.n_sensors
        self.horizon_ = dataset.horizon
        self.lookback_ = dataset.lookback
        self.train_report_ = train(self, dataset, train_indices, validation_indices, config)
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "train_report_") and not getattr(self, "built_", False):
            raise NotFittedError(f"{type(self).__name__} must be fitted before predicting")

    def predict(self, dataset: SpotDataset, indices=None) -> np.ndarray:
        """Normalized predictions [n, horizon, S] for the given sample indices."""
        self._require_fitted()
        indices = (
            np.arange(len(dataset), dtype=np.int64)
            if indices is None
            else check_indices(indices, len(dataset), "predict")
        )
        self.set_training(False)
        chunks = []
        with no_grad():
            for start in range(0, len(indices), self.PREDICT_BATCH):
                batch = dataset.batch(
                    indices[start : start + self.PREDICT_BATCH],
                    include_full_history=self.needs_full_history,
                )
                prediction = self.forward(batch).data
                if not np.isfinite(prediction).all():
                    raise NumericError(f"{type(self).__name__} produced non-finite predictions")
                chunks.append(prediction)
        self.set_training(True)
        return np.concatenate(chunks) if chunks else np.zeros((0, dataset.horizon, dataset.n_sensors))

    def describe(self) -> dict:
        """Architecture summary used for conformance reporting."""
        self._require_fitted()
        return {
            "model": type(self).__name__,
            "parameter_count": self.network.parameter_count(),
        }
