"""SGD-trained linear classifier members (logistic and hinge losses).

The per-sample losses, with labels y in {-1, +1} and margin m = w.x + b:

  logistic: log(1 + exp(-y m))      gradient: -y * sigmoid(-y m) * x
  hinge:    max(0, 1 - y m)         gradient: -y * x where 1 - y m > 0

`loss_and_gradient` is the single source for both the training loop and the
finite-difference checks in the test suite. Updates use a decaying step
size and optional L2 weight decay; class counts can be balanced through
per-sample weights. Warm starts continue from the current coefficients,
which is how an existing filter is updated on a new data window.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

LOSSES = ("logistic", "hinge")


def loss_and_gradient(
    w: np.ndarray, b: float, x: np.ndarray, y: int, loss: str
) -> tuple[float, np.ndarray, float]:
    """Per-sample loss and its gradient wrt (w, b); y must be -1 or +1."""
    if y not in (-1, 1):
        raise ValueError(f"label must be -1 or +1, got {y}")
    m = float(np.dot(w, x)) + b
    ym = y * m
    if loss == "logistic":
        # stable log(1 + exp(-ym)) and sigmoid(-ym)
        if ym >= 0:
            value = float(np.log1p(np.exp(-ym)))
            s = float(np.exp(-ym) / (1.0 + np.exp(-ym)))
        else:
            value = float(-ym + np.log1p(np.exp(ym)))
            s = float(1.0 / (1.0 + np.exp(ym)))
        coeff = -y * s
        return value, coeff * x, coeff
    if loss == "hinge":
        if ym < 1.0:
            return 1.0 - ym, -y * x, float(-y)
        return 0.0, np.zeros_like(x), 0.0
    raise ValueError(f"unknown loss {loss!r}")


class SGDLinearFilter(BaseEstimator, ClassifierMixin):
    """One ensemble member: a linear classifier trained by plain SGD.

    Predictions are 1 when w.x + b >= 0 and 0 otherwise. ``trained_at`` and
    ``val_fscore_`` are bookkeeping set by the ensemble trainer.
    """

    def __init__(
        self,
        loss: str = "logistic",
        learning_rate: float = 0.3,
        decay: float = 0.02,
        epochs: int = 30,
        l2: float = 1e-4,
        seed: int = 0,
        warm_start: bool = False,
    ) -> None:
        self.loss = loss
        self.learning_rate = learning_rate
        self.decay = decay
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed
        self.warm_start = warm_start

    def _check_fitted(self) -> None:
        if not hasattr(self, "coef_"):
            raise NotFittedError("filter is not fitted")

    def objective(self, X: np.ndarray, y01: np.ndarray, sample_weight: np.ndarray) -> float:
        """Weighted mean loss plus the L2 penalty, for the current weights."""
        total = 0.0
        y_signed = np.where(np.asarray(y01) > 0, 1, -1)
        for x, ys, sw in zip(X, y_signed, sample_weight):
            value, _, _ = loss_and_gradient(self.coef_, self.intercept_, x, int(ys), self.loss)
            total += sw * value
        total /= float(np.sum(sample_weight))
        return total + 0.5 * self.l2 * float(np.dot(self.coef_, self.coef_))

    def fit(self, X, y, sample_weight=None) -> "SGDLinearFilter":
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"bad shapes: X {X.shape}, y {y.shape}")
        classes = np.unique(y)
        if classes.size < 2:
            raise ValueError("training data has a single class")
        n, d = X.shape
        if sample_weight is None:
            sample_weight = np.ones(n, dtype=np.float64)
        else:
            sample_weight = np.asarray(sample_weight, dtype=np.float64)
        if not (self.warm_start and hasattr(self, "coef_")):
            self.coef_ = np.zeros(d, dtype=np.float64)
            self.intercept_ = 0.0
        elif self.coef_.shape[0] != d:
            raise ValueError("warm start dimensionality mismatch")
        y_signed = np.where(y > 0, 1, -1)
        rng = np.random.default_rng(self.seed)
        updates = 0
        self.loss_curve_ = [self.objective(X, y, sample_weight)]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for i in order:
                step = self.learning_rate / (1.0 + self.decay * updates)
                _, gw, gb = loss_and_gradient(
                    self.coef_, self.intercept_, X[i], int(y_signed[i]), self.loss
                )
                self.coef_ -= step * (sample_weight[i] * gw + self.l2 * self.coef_)
                self.intercept_ -= step * sample_weight[i] * gb
                updates += 1
            self.loss_curve_.append(self.objective(X, y, sample_weight))
        return self

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(int)
