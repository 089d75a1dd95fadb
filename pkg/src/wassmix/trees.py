"""CART regression trees and additive boosted ensembles, built from scratch.

Exact greedy splitting: every feature and every midpoint between
consecutive distinct sorted values is scored by squared-error reduction.
Ties resolve to the lowest feature index, then the lowest threshold, which
makes fitting fully deterministic.  Trees are immutable once fitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidInputError

_LEAF = -1


@dataclass
class TreeParams:
    max_depth: int = 3
    min_samples_leaf: int = 10
    min_split_improvement: float = 0.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise InvalidInputError("max_depth must be at least 1")
        if self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be at least 1")
        if self.min_split_improvement < 0.0:
            raise InvalidInputError("min_split_improvement must be non-negative")


class RegressionTree:
    """A fitted binary regression tree stored as flat node arrays.

    Node i is internal when feature[i] >= 0 (route left iff
    x[feature[i]] <= threshold[i]) and a leaf otherwise, predicting
    value[i].  train_leaf_id records, for each training row, the node index
    of the leaf it was routed to while fitting.
    """

    def __init__(self, feature, threshold, left, right, value, n_features, train_leaf_id=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_features = int(n_features)
        self.train_leaf_id = train_leaf_id

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions for a batch of rows."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected {self.n_features} features, got shape {X.shape}"
            )
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]

    def predict_one(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise InvalidInputError(
                f"expected a vector of {self.n_features} features, got shape {x.shape}"
            )
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return float(self.value[i])

    def to_dict(self) -> dict:
        """Nested {feature, threshold, left, right} / {leaf} representation."""

        def build(i):
            if self.feature[i] < 0:
                return {"leaf": float(self.value[i])}
            return {
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": build(self.left[i]),
                "right": build(self.right[i]),
            }

        return build(0)

    @classmethod
    def from_dict(cls, node: dict, n_features: int) -> "RegressionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def build(d):
            i = len(feature)
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(0.0)
            if "leaf" in d:
                value[i] = float(d["leaf"])
            else:
                feature[i] = int(d["feature"])
                threshold[i] = float(d["threshold"])
                left[i] = build(d["left"])
                right[i] = build(d["right"])
            return i

        build(node)
        return cls(feature, threshold, left, right, value, n_features)


def fit_tree(X: np.ndarray, targets: np.ndarray, params: TreeParams) -> RegressionTree:
    """Greedy best-first CART fit minimizing within-node squared error."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InvalidInputError("X must be (n, p) with targets of length n")
    if X.shape[0] < 2 * params.min_samples_leaf:
        raise InvalidInputError(
            f"need at least {2 * params.min_samples_leaf} rows, got {X.shape[0]}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidInputError("X and targets must be finite")

    feature, threshold, left, right, value = [], [], [], [], []
    leaf_id = np.empty(X.shape[0], dtype=np.int64)

    def new_node():
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        value.append(0.0)
        return len(feature) - 1

    def grow(idx, depth):
        node = new_node()
        yn = y[idx]
        if depth < params.max_depth and idx.size >= 2 * params.min_samples_leaf and np.ptp(yn) > 0.0:
            best_gain, best_feat, best_pos, best_order = -np.inf, -1, -1, None
            for f in range(X.shape[1]):
                order = np.argsort(X[idx, f], kind="stable")
                gain, pos = _backend.best_split_column(
                    X[idx[order], f], yn[order], params.min_samples_leaf
                )
                if gain > best_gain:
                    best_gain, best_feat, best_pos, best_order = gain, f, pos, order
            if best_feat >= 0 and best_gain > params.min_split_improvement:
                sorted_idx = idx[best_order]
                lo = X[sorted_idx[best_pos], best_feat]
                hi = X[sorted_idx[best_pos + 1], best_feat]
                mid = lo + 0.5 * (hi - lo)
                if not (lo <= mid < hi):
                    mid = lo
                feature[node] = best_feat
                threshold[node] = mid
                left[node] = grow(sorted_idx[: best_pos + 1], depth + 1)
                right[node] = grow(sorted_idx[best_pos + 1:], depth + 1)
                return node
        value[node] = yn.mean()
        leaf_id[idx] = node
        return node

    grow(np.arange(X.shape[0]), 0)
    return RegressionTree(feature, threshold, left, right, value, X.shape[1], leaf_id)


def predict_tree(tree: RegressionTree, x: np.ndarray) -> float:
    """Leaf value reached by threshold routing for a single covariate vector."""
    return tree.predict_one(x)


@dataclass
class TreeEnsemble:
    """base_value + learning_rate * sum of tree predictions; append-only."""

    base_value: float
    learning_rate: float
    trees: list[RegressionTree] = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise InvalidInputError("learning_rate must be positive")

    def append(self, tree: RegressionTree):
        self.trees.append(tree)

    def truncate(self, n_trees: int):
        del self.trees[n_trees:]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.base_value)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict_one(self, x: np.ndarray) -> float:
        return self.base_value + self.learning_rate * sum(
            tree.predict_one(x) for tree in self.trees
        )


def ensemble_predict(ens: TreeEnsemble, x: np.ndarray) -> float:
    """Ensemble prediction for a single covariate vector."""
    return ens.predict_one(x)
