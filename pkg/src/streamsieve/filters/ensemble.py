"""Voting ensembles of linear filters with performance-derived weights.

Member votes are class labels (0/1). The "unweighted" scheme averages the
votes; "model" weights each member proportionally to its validation f-score
(w_i = f_i / sum_a f_a); "expert" uses caller-provided raw weights,
normalized. A score of at least 0.5 marks the post relevant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .encoding import HashingTextEncoder
from .linear import SGDLinearFilter

SCHEMES = ("unweighted", "model", "expert")


def binary_fscore(y_true, y_pred) -> float:
    """F1 on the positive class; zero denominators yield 0 by convention."""
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def model_weights(fscores) -> np.ndarray:
    """Performance-proportional weights; all-zero scores fall back to uniform."""
    f = np.asarray(fscores, dtype=np.float64)
    if f.size == 0:
        raise ValueError("no member scores")
    if np.any(f < 0):
        raise ValueError("f-scores must be non-negative")
    total = float(f.sum())
    if total == 0.0:
        return np.full(f.size, 1.0 / f.size)
    return f / total


class VotingFilterEnsemble(BaseEstimator, ClassifierMixin):
    """Weighted label-vote ensemble over fitted linear members."""

    def __init__(
        self,
        members: list[SGDLinearFilter] | None = None,
        weights=None,
        scheme: str = "model",
        trained_at: int = 0,
    ) -> None:
        self.members = members or []
        self.scheme = scheme
        self.trained_at = trained_at
        if scheme not in SCHEMES:
            raise ValueError(f"unknown weighting scheme {scheme!r}")
        if not self.members:
            self.weights = np.zeros(0)
            return
        if scheme == "unweighted" or weights is None:
            self.weights = np.full(len(self.members), 1.0 / len(self.members))
        else:
            self.weights = np.asarray(weights, dtype=np.float64)
            total = float(self.weights.sum())
            if total <= 0:
                raise ValueError("weights must sum to a positive value")
            self.weights = self.weights / total
        if self.weights.size != len(self.members):
            raise ValueError("one weight per member required")

    @property
    def val_fscores(self) -> list[float]:
        return [getattr(m, "val_fscore_", 0.0) for m in self.members]

    def predict_score(self, X) -> np.ndarray:
        if not self.members:
            raise NotFittedError("ensemble has no members")
        votes = np.stack([m.predict(X) for m in self.members])  # (members, n)
        return self.weights @ votes

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= 0.5).astype(int)

    def margin_densities(self, X, band: float) -> list[float]:
        """Per-member fraction of samples within the decision-boundary band."""
        out = []
        for m in self.members:
            margins = np.abs(m.decision_function(X))
            out.append(float(np.mean(margins <= band)) if len(X) else 0.0)
        return out


def _stratified_split(y: np.ndarray, val_fraction: float, rng: np.random.Generator):
    """Index split keeping at least one sample of each class in training."""
    train_idx, val_idx = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(val_fraction * idx.size))
        n_val = min(n_val, idx.size - 1)
        val_idx.extend(idx[:n_val].tolist())
        train_idx.extend(idx[n_val:].tolist())
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(val_idx, dtype=int))


def train_filter(
    labeled,
    encoder: HashingTextEncoder,
    algos: tuple[str, ...] = ("logistic", "hinge"),
    scheme: str = "model",
    expert_weights=None,
    seed: int = 0,
    trained_at: int = 0,
    warm_members: list[SGDLinearFilter] | None = None,
    epochs: int = 30,
) -> VotingFilterEnsemble:
    """Train one ensemble from labeled posts.

    Uses an 80/20 stratified split for validation f-scores and balances the
    classes with inverse-frequency sample weights. ``warm_members`` continues
    training from an existing ensemble's coefficients instead of fresh
    random-order SGD from zero (the "update" path).
    """
    texts = [lp.post.p for lp in labeled]
    y = np.array([1 if lp.label == "relevant" else 0 for lp in labeled], dtype=int)
    if y.size == 0 or np.unique(y).size < 2:
        raise ValueError("training needs at least one sample of each class")
    X = encoder.transform(texts)
    rng = np.random.default_rng(seed)
    train_idx, val_idx = _stratified_split(y, 0.2, rng)
    counts = np.bincount(y, minlength=2)
    class_w = y.size / (2.0 * np.maximum(counts, 1))
    sample_weight = class_w[y]

    members = []
    for k, algo in enumerate(algos):
        if warm_members is not None:
            member = clone_member(warm_members[k])
            member.warm_start = True
            member.epochs = epochs
            member.seed = seed + k
        else:
            member = SGDLinearFilter(loss=algo, seed=seed + k, epochs=epochs)
        member.fit(X[train_idx], y[train_idx], sample_weight=sample_weight[train_idx])
        if val_idx.size:
            member.val_fscore_ = binary_fscore(y[val_idx], member.predict(X[val_idx]))
        else:
            member.val_fscore_ = binary_fscore(y[train_idx], member.predict(X[train_idx]))
        member.trained_at = trained_at
        members.append(member)

    if scheme == "model":
        weights = model_weights([m.val_fscore_ for m in members])
    elif scheme == "expert":
        if expert_weights is None:
            raise ValueError("expert scheme needs explicit weights")
        weights = np.asarray(expert_weights, dtype=np.float64)
    else:
        weights = None
    return VotingFilterEnsemble(members, weights=weights, scheme=scheme, trained_at=trained_at)


def clone_member(member: SGDLinearFilter) -> SGDLinearFilter:
    """Deep copy of a fitted member (coefficients included)."""
    fresh = SGDLinearFilter(
        loss=member.loss,
        learning_rate=member.learning_rate,
        decay=member.decay,
        epochs=member.epochs,
        l2=member.l2,
        seed=member.seed,
        warm_start=member.warm_start,
    )
    if hasattr(member, "coef_"):
        fresh.coef_ = member.coef_.copy()
        fresh.intercept_ = member.intercept_
    if hasattr(member, "val_fscore_"):
        fresh.val_fscore_ = member.val_fscore_
    return fresh


def clone_ensemble(ensemble: VotingFilterEnsemble) -> VotingFilterEnsemble:
    members = [clone_member(m) for m in ensemble.members]
    return VotingFilterEnsemble(
        members,
        weights=ensemble.weights.copy() if ensemble.scheme != "unweighted" else None,
        scheme=ensemble.scheme,
        trained_at=ensemble.trained_at,
    )
