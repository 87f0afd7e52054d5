"""Scikit-learn style estimator around RU training."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_scalar

from .core import ObservedData
from .ru import TrainConfig, policy_from_model, train
from .synthetic import stream_rng
from .values import make_kind


class RUPolicyLearner(BaseEstimator):
    """Learn a Γ-robust treatment policy from RCT data by RU Regression.

    Parameters
    ----------
    gamma : float, default=1.0
        Sampling-bias strength, at least 1.
    objective : {"maxmin", "gain"}, default="maxmin"
    baseline : str or callable, optional
        Baseline policy for ``objective="gain"``: ``"always_control"``,
        ``"always_treat"``, ``"x1_rule"`` or a callable returning 0/1.
    e : float, default=0.5
        Known treatment probability of the trial.
    hidden_layer_sizes : tuple of int, default=(64, 64, 64)
    max_epochs : int, default=50
    batch_size : int, default=4000
    learning_rate : float, default=1e-2
    validation_fraction : float, default=1/3
        Held-out share used for snapshot selection when ``eval_set`` is not
        passed to :meth:`fit`.
    random_state : int, default=0

    Attributes
    ----------
    model_ : RuModel
    policy_ : ScorePolicy
    n_features_in_ : int
    history_ : list of (epoch, train_loss, val_loss)
    best_epoch_ : int
    """

    def __init__(self, gamma=1.0, objective="maxmin", baseline=None, e=0.5,
                 hidden_layer_sizes=(64, 64, 64), max_epochs=50, batch_size=4000,
                 learning_rate=1e-2, validation_fraction=1 / 3, random_state=0):
        self.gamma = gamma
        self.objective = objective
        self.baseline = baseline
        self.e = e
        self.hidden_layer_sizes = hidden_layer_sizes
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _validate_params(self):
        check_scalar(self.gamma, "gamma", (int, float), min_val=1.0)
        check_scalar(self.e, "e", float, min_val=0.0, max_val=1.0, include_boundaries="neither")
        check_scalar(self.max_epochs, "max_epochs", int, min_val=1)
        check_scalar(self.batch_size, "batch_size", int, min_val=1)
        check_scalar(self.learning_rate, "learning_rate", (int, float), min_val=0.0,
                     include_boundaries="neither")
        check_scalar(self.validation_fraction, "validation_fraction", float, min_val=0.0,
                     max_val=1.0, include_boundaries="neither")
        if self.objective not in ("maxmin", "gain"):
            raise ValueError(f"objective must be 'maxmin' or 'gain', got {self.objective!r}")

    @staticmethod
    def _check_xyw(X, y, w):
        X = check_array(X, dtype=np.float64)
        y = check_array(np.asarray(y).reshape(-1, 1), dtype=np.float64).ravel()
        w = np.asarray(w).ravel()
        if not (len(X) == len(y) == len(w)):
            raise ValueError("X, y and w must have the same number of rows")
        return ObservedData(X, y, w)

    def fit(self, X, y, w, eval_set=None):
        """Fit on records ``(X, y, w)``.

        ``eval_set`` is an optional ``(X_val, y_val, w_val)`` triple used for
        snapshot selection; otherwise a random ``validation_fraction`` of the
        rows is held out.
        """
        self._validate_params()
        data = self._check_xyw(X, y, w)
        if eval_set is None:
            if len(data) < 2:
                raise ValueError("need at least two rows to hold out a validation set")
            perm = stream_rng(self.random_state, "validation-split").permutation(len(data))
            n_val = min(max(1, int(round(self.validation_fraction * len(data)))), len(data) - 1)
            val, tr = data.subset(np.sort(perm[:n_val])), data.subset(np.sort(perm[n_val:]))
        else:
            tr, val = data, self._check_xyw(*eval_set)
        config = TrainConfig(
            gamma=float(self.gamma),
            kind=make_kind(self.objective, self.baseline),
            e=float(self.e),
            epochs_max=self.max_epochs,
            batch_size=self.batch_size,
            learning_rate=float(self.learning_rate),
            hidden=tuple(self.hidden_layer_sizes),
            seed=self.random_state,
        )
        self.model_ = train(tr, val, config)
        self.policy_ = policy_from_model(self.model_)
        self.n_features_in_ = data.n_features
        self.history_ = self.model_.meta["history"]
        self.best_epoch_ = self.model_.meta["best_epoch"]
        return self

    def _check_X(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def decision_function(self, X):
        """Score ``h(x)`` in [0, 1]."""
        return self.model_.h(self._check_X(X))

    def predict(self, X):
        """Treatment decisions ``I(h(x) >= 1/2)``."""
        X = self._check_X(X)
        return self.policy_.decide(X)

    def predict_alpha(self, X, w):
        """Auxiliary head ``alpha(x, w)``."""
        return self.model_.alpha(self._check_X(X), np.asarray(w).ravel())
