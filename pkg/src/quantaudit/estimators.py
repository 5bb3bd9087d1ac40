"""Scikit-learn style wrappers around the dense-net trainer.

``DenseNetClassifier`` / ``DenseNetRegressor`` expose the usual
fit/predict/get_params surface so the models compose with sklearn
utilities (clone, cross_val_score, pipelines).  The fitted attributes
keep the flat-parameter representation used by the quantizers, and
``record_trajectory=True`` retains the per-epoch checkpoints that the
privacy score consumes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datasets import Dataset, TASK_CLASSIFICATION, TASK_REGRESSION
from .exceptions import InvalidArgumentError
from .nets import (
    NetArchitecture,
    TrainConfig,
    forward_batch,
    sigmoid,
    train,
)


class _DenseNetBase(BaseEstimator):
    def __init__(
        self,
        hidden_dims=(),
        epochs=200,
        learning_rate=1e-3,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        use_bias=True,
        activation="relu",
        record_trajectory=False,
        random_state=0,
    ):
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.use_bias = use_bias
        self.activation = activation
        self.record_trajectory = record_trajectory
        self.random_state = random_state

    _task_kind = TASK_CLASSIFICATION

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            adam_beta1=self.beta1,
            adam_beta2=self.beta2,
            adam_eps=self.eps,
            seed=self.random_state,
            task_kind=self._task_kind,
        )

    def _fit_arrays(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        dataset = Dataset(xs=X, ys=np.asarray(y, dtype=np.float64),
                          task_kind=self._task_kind)
        arch = NetArchitecture(
            input_dim=X.shape[1],
            hidden_dims=tuple(self.hidden_dims),
            use_bias=self.use_bias,
            activation=self.activation,
        )
        trajectory = train(
            dataset,
            self._train_config(),
            init_seed=self.random_state,
            arch=arch,
            keep_checkpoints=self.record_trajectory,
        )
        self.n_features_in_ = X.shape[1]
        self.arch_ = arch
        self.params_ = trajectory.final_params
        self.trajectory_ = trajectory if self.record_trajectory else None
        return self

    def _outputs(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward_batch(self.params_, X)


class DenseNetClassifier(_DenseNetBase, ClassifierMixin):
    """Binary classifier: dense net with a sigmoid head, trained on BCE."""

    _task_kind = TASK_CLASSIFICATION

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64)
        if y.size and not np.isin(y, (0.0, 1.0)).all():
            raise InvalidArgumentError("targets must be binary 0/1")
        if len(np.unique(y)) < 2:
            raise InvalidArgumentError("need both classes present to fit")
        self.classes_ = np.array([0.0, 1.0])
        return self._fit_arrays(X, y)

    def decision_function(self, X) -> np.ndarray:
        return self._outputs(X)

    def predict_proba(self, X) -> np.ndarray:
        p = sigmoid(self._outputs(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self._outputs(X) >= 0.0).astype(np.float64)


class DenseNetRegressor(_DenseNetBase, RegressorMixin):
    """Dense net trained on mean squared error."""

    _task_kind = TASK_REGRESSION

    def fit(self, X, y):
        return self._fit_arrays(X, y)

    def predict(self, X) -> np.ndarray:
        return self._outputs(X)
