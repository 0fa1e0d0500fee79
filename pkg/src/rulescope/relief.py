"""MultiSURF feature importance, used as expert knowledge for rule discovery.

For every target instance the mean per-feature difference to each other
instance defines a distance; neighbors closer than (mean - std/2) of the
target's distance distribution form its near zone.  Near hits subtract their
feature differences from the score, near misses add them weighted by
P(miss class) / (1 - P(target class)), and the totals are averaged over
targets.  Far-zone scoring is deliberately not included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CONTINUOUS, Dataset


@dataclass
class FeatureWeights:
    """Per-feature scores aligned to dataset feature order.

    ``normalized`` is filled by :func:`normalize_weights` and holds
    non-negative weights summing to 1.
    """

    feature_names: list[str]
    scores: np.ndarray
    normalized: np.ndarray | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.scores) != len(self.feature_names):
            raise ValueError("score length must equal feature count")
        if self.normalized is not None:
            self.normalized = np.asarray(self.normalized, dtype=np.float64)
            if abs(float(self.normalized.sum()) - 1.0) > 1e-9:
                raise ValueError("normalized weights must sum to 1")


def multisurf(train: Dataset, subsample: int | None = None, seed: int = 0) -> FeatureWeights:
    """MultiSURF scores over a training set.

    ``subsample`` limits the number of scored target instances (drawn without
    replacement); every instance still serves as a potential neighbor.
    """
    n, p = train.X.shape
    if n < 3:
        raise ValueError("multisurf needs at least 3 instances")
    if len(set(train.y.tolist())) < 2:
        raise ValueError("multisurf needs at least 2 classes in the training data")
    all_missing = np.isnan(train.X).all(axis=0)
    if all_missing.any():
        bad = [train.features[j].name for j in np.where(all_missing)[0]]
        raise ValueError(f"feature(s) with no observed values: {bad}")

    X = train.X
    y = train.y
    is_cont = np.array([f.kind == CONTINUOUS for f in train.features])
    ranges = np.array([max(f.value_range, 0.0) for f in train.features])
    ranges[ranges == 0.0] = 1.0  # constant continuous feature: differences are 0 anyway

    # Pairwise distances as the mean per-feature difference.
    D = np.zeros((n, n))
    for j in range(p):
        col = X[:, j]
        if is_cont[j]:
            dif = np.abs(col[:, None] - col[None, :]) / ranges[j]
        else:
            dif = (col[:, None] != col[None, :]).astype(np.float64)
        nanmask = np.isnan(col)
        if nanmask.any():
            dif[nanmask, :] = 1.0
            dif[:, nanmask] = 1.0
        D += dif
    D /= p
    np.fill_diagonal(D, 0.0)

    # Near-zone threshold per target: mean - std/2 over distances to others.
    others = ~np.eye(n, dtype=bool)
    sums = D.sum(axis=1)
    mu = sums / (n - 1)
    sq = (D**2).sum(axis=1)
    var = sq / (n - 1) - mu**2
    sigma = np.sqrt(np.maximum(var, 0.0))
    threshold = mu - sigma / 2.0

    counts = np.bincount(y, minlength=len(train.class_names)).astype(np.float64)
    prior = counts / n

    if subsample is not None and subsample < n:
        rng = np.random.default_rng(seed)
        targets = np.sort(rng.choice(n, size=subsample, replace=False))
    else:
        targets = np.arange(n)

    scores = np.zeros(p)
    for i in targets:
        near = (D[i] < threshold[i]) & others[i]
        if not near.any():
            continue
        idx = np.where(near)[0]
        diffs = _pairwise_to_target(X, i, idx, is_cont, ranges)
        same = y[idx] == y[i]
        if same.any():
            scores -= diffs[same].sum(axis=0)
        miss_idx = idx[~same]
        if miss_idx.size:
            w = prior[y[miss_idx]] / (1.0 - prior[y[i]])
            scores += (diffs[~same] * w[:, None]).sum(axis=0)
    scores /= len(targets)
    return FeatureWeights(train.feature_names, scores)


def _pairwise_to_target(
    X: np.ndarray, i: int, idx: np.ndarray, is_cont: np.ndarray, ranges: np.ndarray
) -> np.ndarray:
    """Per-feature differences between instance i and rows idx, shape (len(idx), p)."""
    xi = X[i]
    sub = X[idx]
    out = np.empty_like(sub)
    cont = is_cont
    if cont.any():
        out[:, cont] = np.abs(sub[:, cont] - xi[cont][None, :]) / ranges[cont][None, :]
    disc = ~cont
    if disc.any():
        out[:, disc] = (sub[:, disc] != xi[disc][None, :]).astype(np.float64)
    nan_any = np.isnan(sub) | np.isnan(xi)[None, :]
    out[nan_any] = 1.0
    return out


def normalize_weights(w: FeatureWeights) -> FeatureWeights:
    """Min-max scale scores to [0, 1], then divide by the sum.

    All-equal raw scores yield uniform weights.
    """
    s = w.scores
    lo, hi = float(s.min()), float(s.max())
    if hi - lo < 1e-300:
        norm = np.full(len(s), 1.0 / len(s))
    else:
        scaled = (s - lo) / (hi - lo)
        norm = scaled / scaled.sum()
    return FeatureWeights(list(w.feature_names), s.copy(), norm)
