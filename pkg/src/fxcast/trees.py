"""Regression trees and the two ensemble families built on them.

Splits minimize within-node variance (equivalently the sum of squared
errors); greedy-exact mode scans midpoints between consecutive distinct
values, random-threshold mode (extra-trees) draws one uniform threshold
per candidate feature. Candidate features are re-drawn per node. Everything
is deterministic given (data, hyperparameters, seed): per-tree generators
are spawned from one seed sequence and ties break to the lowest feature
index, then the lowest threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

N_ESTIMATORS_GRID = [100, 300, 500, 700, 1000, 2000]
MAX_DEPTH_GRID = [3, 4, 5, 6, 7, 8, 9, 10]
MAX_FEATURES_GRID = ["sqrt", "log2"]
DEFAULT_LEARNING_RATE = 0.1

GREEDY_EXACT = "greedy_exact"
RANDOM_THRESHOLD = "random_threshold"


@dataclass(frozen=True)
class TreeHyperparams:
    n_estimators: int = 100
    max_depth: int = 3
    max_features: str = "sqrt"  # sqrt | log2 | all
    learning_rate: float = DEFAULT_LEARNING_RATE
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValidationError("n_estimators must be >= 1")
        if self.max_depth < 0:
            raise ValidationError("max_depth must be >= 0")
        if self.max_features not in ("sqrt", "log2", "all"):
            raise ValidationError(f"max_features must be sqrt|log2|all, got {self.max_features!r}")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValidationError("learning_rate must lie in (0, 1]")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (value). Cover is
    the training-sample count that reached the node."""

    cover: int
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: float = 0.0
    gain: float = 0.0  # SSE reduction of this split (internal nodes)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "cover": self.cover}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "gain": self.gain,
            "cover": self.cover,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "feature" not in doc:
            return cls(cover=doc["cover"], value=doc["value"])
        return cls(
            cover=doc["cover"],
            feature=doc["feature"],
            threshold=doc["threshold"],
            gain=doc.get("gain", 0.0),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


def _sse(y: np.ndarray) -> float:
    if y.size == 0:
        return 0.0
    return float(np.sum((y - y.mean()) ** 2))


def _n_candidates(max_features: str, n_features: int) -> int:
    if max_features == "all":
        return n_features
    if max_features == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    return max(1, int(math.log2(n_features))) if n_features > 1 else 1


def _best_greedy_split(X: np.ndarray, y: np.ndarray, candidates: np.ndarray, sse_parent: float):
    """Scan midpoints between consecutive distinct values of each candidate.

    Returns (feature, threshold, gain) or None. Candidates must be in
    ascending index order so equal gains resolve to the lowest feature.
    """
    best = None
    n = y.size
    for j in candidates:
        x = X[:, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[order]
        distinct = xs[1:] > xs[:-1]
        if not distinct.any():
            continue
        cum_y = np.cumsum(ys)
        cum_y2 = np.cumsum(ys * ys)
        left_n = np.arange(1, n, dtype=float)
        left_y = cum_y[:-1]
        left_y2 = cum_y2[:-1]
        right_n = n - left_n
        right_y = cum_y[-1] - left_y
        right_y2 = cum_y2[-1] - left_y2
        sse_split = (left_y2 - left_y * left_y / left_n) + (right_y2 - right_y * right_y / right_n)
        gains = np.where(distinct, sse_parent - sse_split, -np.inf)
        pos = int(np.argmax(gains))  # first max -> lowest threshold
        gain = float(gains[pos])
        if gain > 0.0 and (best is None or gain > best[2]):
            threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
            best = (int(j), threshold, gain)
    return best


def _best_random_split(X, y, candidates, sse_parent, rng: np.random.Generator):
    """One uniform threshold per candidate feature; keep the best gain."""
    best = None
    for j in candidates:
        x = X[:, j]
        lo, hi = float(x.min()), float(x.max())
        if lo == hi:
            continue
        threshold = float(rng.uniform(lo, hi))
        mask = x <= threshold
        if mask.all() or not mask.any():
            continue
        gain = sse_parent - _sse(y[mask]) - _sse(y[~mask])
        if gain > 0.0 and (best is None or gain > best[2]):
            best = (int(j), threshold, gain)
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    max_features: str = "all",
    mode: str = GREEDY_EXACT,
    rng: np.random.Generator | None = None,
) -> TreeNode:
    """Grow one regression tree; degenerate nodes become leaves."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValidationError("X must be [n x p] with matching y")
    if X.shape[0] < 1:
        raise ValidationError("empty training set")
    if mode not in (GREEDY_EXACT, RANDOM_THRESHOLD):
        raise ValidationError(f"unknown split mode {mode!r}")
    if rng is None:
        rng = np.random.default_rng(0)
    p = X.shape[1]
    k = _n_candidates(max_features, p)

    def build(rows: np.ndarray, depth: int) -> TreeNode:
        yr = y[rows]
        node_sse = _sse(yr)
        if depth >= max_depth or rows.size < 2 or node_sse <= 0.0:
            return TreeNode(cover=int(rows.size), value=float(yr.mean()))
        if k >= p:
            candidates = np.arange(p)
        else:
            candidates = np.sort(rng.choice(p, size=k, replace=False))
        Xr = X[rows, :]
        if mode == GREEDY_EXACT:
            best = _best_greedy_split(Xr, yr, candidates, node_sse)
        else:
            best = _best_random_split(Xr, yr, candidates, node_sse, rng)
        if best is None:
            return TreeNode(cover=int(rows.size), value=float(yr.mean()))
        feature, threshold, gain = best
        mask = Xr[:, feature] <= threshold
        left = build(rows[mask], depth + 1)
        right = build(rows[~mask], depth + 1)
        return TreeNode(
            cover=int(rows.size),
            feature=feature,
            threshold=threshold,
            gain=gain,
            left=left,
            right=right,
        )

    return build(np.arange(X.shape[0]), 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    out = np.empty(X.shape[0])

    def rec(nd: TreeNode, idx: np.ndarray):
        if nd.is_leaf:
            out[idx] = nd.value
            return
        mask = X[idx, nd.feature] <= nd.threshold
        rec(nd.left, idx[mask])
        rec(nd.right, idx[~mask])

    rec(node, np.arange(X.shape[0]))
    return out


EXTRA_TREES = "extra_trees"
GRADIENT_BOOSTING = "gradient_boosting"


@dataclass(frozen=True)
class EnsembleModel:
    """Bagged random-threshold forest or boosted greedy trees."""

    kind: str
    trees: tuple[TreeNode, ...]
    n_features: int
    base_score: float = 0.0
    learning_rate: float = 1.0
    hyperparams: TreeHyperparams | None = None
    feature_names: tuple[str, ...] | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValidationError(f"feature count mismatch: model has {self.n_features}, got {X.shape[1]}")
        parts = np.stack([tree_predict(t, X) for t in self.trees])
        if self.kind == EXTRA_TREES:
            return parts.mean(axis=0)
        return self.base_score + self.learning_rate * parts.sum(axis=0)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "n_trees": len(self.trees),
            "n_features": self.n_features,
            "max_depth": max(t.depth() for t in self.trees),
        }

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "n_features": self.n_features,
                "base_score": self.base_score,
                "learning_rate": self.learning_rate,
                "feature_names": list(self.feature_names) if self.feature_names else None,
                "trees": [t.to_dict() for t in self.trees],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EnsembleModel":
        doc = json.loads(text)
        return cls(
            kind=doc["kind"],
            trees=tuple(TreeNode.from_dict(t) for t in doc["trees"]),
            n_features=doc["n_features"],
            base_score=doc["base_score"],
            learning_rate=doc["learning_rate"],
            feature_names=tuple(doc["feature_names"]) if doc["feature_names"] else None,
        )


def fit_extra_trees(X: np.ndarray, y: np.ndarray, hp: TreeHyperparams, feature_names=None) -> EnsembleModel:
    """Bagging over random-threshold trees, each fit on the whole sample."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    streams = np.random.SeedSequence(hp.seed).spawn(hp.n_estimators)
    trees = tuple(
        fit_tree(
            X,
            y,
            max_depth=hp.max_depth,
            max_features=hp.max_features,
            mode=RANDOM_THRESHOLD,
            rng=np.random.default_rng(streams[i]),
        )
        for i in range(hp.n_estimators)
    )
    return EnsembleModel(
        kind=EXTRA_TREES,
        trees=trees,
        n_features=X.shape[1],
        hyperparams=hp,
        feature_names=tuple(feature_names) if feature_names else None,
    )


def fit_gbm(X: np.ndarray, y: np.ndarray, hp: TreeHyperparams, feature_names=None) -> EnsembleModel:
    """Stagewise squared-error boosting: each greedy tree fits the current
    residuals and is added with the learning rate; the initial score is the
    target mean."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    base = float(y.mean())
    current = np.full(y.shape[0], base)
    streams = np.random.SeedSequence(hp.seed).spawn(hp.n_estimators)
    trees = []
    for i in range(hp.n_estimators):
        residual = y - current
        tree = fit_tree(
            X,
            residual,
            max_depth=hp.max_depth,
            max_features=hp.max_features,
            mode=GREEDY_EXACT,
            rng=np.random.default_rng(streams[i]),
        )
        trees.append(tree)
        current += hp.learning_rate * tree_predict(tree, X)
    return EnsembleModel(
        kind=GRADIENT_BOOSTING,
        trees=tuple(trees),
        n_features=X.shape[1],
        base_score=base,
        learning_rate=hp.learning_rate,
        hyperparams=hp,
        feature_names=tuple(feature_names) if feature_names else None,
    )
