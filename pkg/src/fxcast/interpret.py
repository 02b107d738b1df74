"""Feature importance and Shapley attribution.

Tree attributions use the path-dependent convention: a feature absent from
the coalition is marginalized by cover-weighted descent through its splits,
so no background dataset is needed and an exhaustive coalition-enumeration
oracle can check the fast algorithm exactly. Linear attributions use the
training-mean background. Every attribution satisfies local accuracy:
base value plus the contribution vector reproduces the model prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Callable, Sequence

import numpy as np

from .data import SupervisedDataset
from .errors import MethodError, ValidationError
from .linear import LinearModel
from .metrics import ForecastSeries, nrmse
from .trees import EXTRA_TREES, GRADIENT_BOOSTING, EnsembleModel, TreeNode

BRUTE_FORCE_MAX_FEATURES = 15


@dataclass(frozen=True)
class Attribution:
    """Per-instance Shapley vector plus the base (expected) value."""

    base_value: float
    phi: np.ndarray
    timestamp: date | None = None

    @property
    def total(self) -> float:
        return self.base_value + float(np.sum(self.phi))


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature scores normalized so the leader gets 1.0."""

    method: str
    feature_names: tuple[str, ...]
    raw_scores: np.ndarray
    scores: np.ndarray

    def ranking(self) -> list[str]:
        order = np.argsort(-self.scores, kind="stable")
        return [self.feature_names[i] for i in order]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "scores": {n: float(s) for n, s in zip(self.feature_names, self.scores)},
            "raw_scores": {n: float(s) for n, s in zip(self.feature_names, self.raw_scores)},
        }


def _make_report(method: str, feature_names: Sequence[str], raw: np.ndarray) -> ImportanceReport:
    raw = np.asarray(raw, dtype=float)
    if np.any(raw < 0):
        raise ValidationError("raw importance scores must be nonnegative")
    top = raw.max() if raw.size else 0.0
    scores = raw / top if top > 0 else np.zeros_like(raw)
    return ImportanceReport(
        method=method, feature_names=tuple(feature_names), raw_scores=raw, scores=scores
    )


def _default_names(n: int) -> list[str]:
    return [f"x{j}" for j in range(n)]


# ---------------------------------------------------------------------------
# Global importance


def split_gain_importance(model: EnsembleModel) -> ImportanceReport:
    """Total SSE reduction contributed by each feature's splits."""
    if not isinstance(model, EnsembleModel):
        raise MethodError("split-gain importance needs a tree-family model")
    raw = np.zeros(model.n_features)

    def walk(node: TreeNode):
        if node.is_leaf:
            return
        raw[node.feature] += node.gain
        walk(node.left)
        walk(node.right)

    for tree in model.trees:
        walk(tree)
    names = model.feature_names or _default_names(model.n_features)
    return _make_report("split_gain", names, raw)


def split_count_importance(model: EnsembleModel) -> ImportanceReport:
    """How often each feature is used for splitting."""
    if not isinstance(model, EnsembleModel):
        raise MethodError("split-count importance needs a tree-family model")
    raw = np.zeros(model.n_features)

    def walk(node: TreeNode):
        if node.is_leaf:
            return
        raw[node.feature] += 1.0
        walk(node.left)
        walk(node.right)

    for tree in model.trees:
        walk(tree)
    names = model.feature_names or _default_names(model.n_features)
    return _make_report("split_count", names, raw)


def coefficient_importance(model: LinearModel) -> ImportanceReport:
    """|standardized coefficient| per feature."""
    if not isinstance(model, LinearModel):
        raise MethodError("coefficient importance needs a linear model")
    names = model.feature_names or _default_names(model.coefficients.shape[0])
    return _make_report("coefficient", names, np.abs(model.coefficients))


def permutation_importance(
    model,
    X: np.ndarray,
    y: np.ndarray,
    metric: Callable[[ForecastSeries], float] = nrmse,
    repeats: int = 5,
    rng: np.random.Generator | None = None,
    feature_names: Sequence[str] | None = None,
) -> ImportanceReport:
    """Mean metric degradation when one column is shuffled; negative
    deltas are clipped to zero before normalization."""
    if rng is None:
        rng = np.random.default_rng(0)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    baseline = metric(ForecastSeries(y=y, yhat=model.predict(X)))
    p = X.shape[1]
    raw = np.zeros(p)
    for j in range(p):
        deltas = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = Xp[rng.permutation(X.shape[0]), j]
            deltas.append(metric(ForecastSeries(y=y, yhat=model.predict(Xp))) - baseline)
        raw[j] = max(0.0, float(np.mean(deltas)))
    names = feature_names or getattr(model, "feature_names", None) or _default_names(p)
    return _make_report("permutation", names, raw)


# ---------------------------------------------------------------------------
# Shapley values: exact path-dependent algorithm for trees

# A path element is [feature, zero_fraction, one_fraction, pweight].


def _extend(path: list[list[float]], pz: float, po: float, fi: int) -> None:
    l = len(path)
    path.append([fi, pz, po, 1.0 if l == 0 else 0.0])
    for i in range(l - 1, -1, -1):
        path[i + 1][3] += po * path[i][3] * (i + 1) / (l + 1)
        path[i][3] = pz * path[i][3] * (l - i) / (l + 1)


def _unwind(path: list[list[float]], d: int, k: int) -> None:
    one = path[k][2]
    zero = path[k][1]
    n = path[d][3]
    for i in range(d - 1, -1, -1):
        if one != 0.0:
            tmp = path[i][3]
            path[i][3] = n * (d + 1) / ((i + 1) * one)
            n = tmp - path[i][3] * zero * (d - i) / (d + 1)
        else:
            path[i][3] = path[i][3] * (d + 1) / (zero * (d - i))
    for i in range(k, d):
        path[i][0] = path[i + 1][0]
        path[i][1] = path[i + 1][1]
        path[i][2] = path[i + 1][2]
    path.pop()


def _unwound_sum(path: list[list[float]], d: int, k: int) -> float:
    one = path[k][2]
    zero = path[k][1]
    n = path[d][3]
    total = 0.0
    for i in range(d - 1, -1, -1):
        if one != 0.0:
            tmp = n * (d + 1) / ((i + 1) * one)
            total += tmp
            n = path[i][3] - tmp * zero * (d - i) / (d + 1)
        else:
            total += path[i][3] * (d + 1) / (zero * (d - i))
    return total


def _shap_one_tree(root: TreeNode, x: np.ndarray, phi: np.ndarray) -> None:
    def recurse(node: TreeNode, parent_path, pz: float, po: float, pf: int):
        path = [el.copy() for el in parent_path]
        _extend(path, pz, po, pf)
        d = len(path) - 1
        if node.is_leaf:
            for i in range(1, d + 1):
                w = _unwound_sum(path, d, i)
                el = path[i]
                phi[el[0]] += w * (el[2] - el[1]) * node.value
            return
        if x[node.feature] <= node.threshold:
            hot, cold = node.left, node.right
        else:
            hot, cold = node.right, node.left
        hot_zero = hot.cover / node.cover
        cold_zero = cold.cover / node.cover
        iz = io = 1.0
        k = next((i for i in range(d + 1) if path[i][0] == node.feature), None)
        if k is not None:
            iz, io = path[k][1], path[k][2]
            _unwind(path, d, k)
        recurse(hot, path, hot_zero * iz, io, node.feature)
        recurse(cold, path, cold_zero * iz, 0.0, node.feature)

    recurse(root, [], 1.0, 1.0, -1)


def _tree_expected_value(node: TreeNode) -> float:
    if node.is_leaf:
        return node.value
    return (
        node.left.cover * _tree_expected_value(node.left)
        + node.right.cover * _tree_expected_value(node.right)
    ) / node.cover


def tree_shap(model: EnsembleModel, instance: np.ndarray, timestamp: date | None = None) -> Attribution:
    """Exact Shapley values of the path-dependent value function, summed
    across trees (boosting contributions are scaled by the learning rate)."""
    if not isinstance(model, EnsembleModel):
        raise MethodError("tree_shap needs a tree-family model")
    x = np.asarray(instance, dtype=float).ravel()
    if x.shape[0] != model.n_features:
        raise ValidationError(f"instance has {x.shape[0]} features, model expects {model.n_features}")
    phi = np.zeros(model.n_features)
    base = 0.0
    if model.kind == EXTRA_TREES:
        scale = 1.0 / len(model.trees)
        offset = 0.0
    else:
        scale = model.learning_rate
        offset = model.base_score
    for tree in model.trees:
        tphi = np.zeros(model.n_features)
        _shap_one_tree(tree, x, tphi)
        phi += scale * tphi
        base += scale * _tree_expected_value(tree)
    return Attribution(base_value=base + offset, phi=phi, timestamp=timestamp)


def linear_shap(
    model: LinearModel,
    instance: np.ndarray,
    background_X: np.ndarray,
    timestamp: date | None = None,
) -> Attribution:
    """Independent-feature interventional attribution for a linear model:
    phi_j = beta_j * (z_j - mean background z_j) in prediction units."""
    if not isinstance(model, LinearModel):
        raise MethodError("linear_shap needs a linear model")
    x = np.asarray(instance, dtype=float).ravel()
    bg = np.asarray(background_X, dtype=float)
    if bg.ndim != 2 or bg.shape[1] != x.shape[0]:
        raise ValidationError("background must be a 2-D matrix matching the instance width")
    z = (x - model.feature_means) / model.feature_sds
    z_bg = (bg - model.feature_means) / model.feature_sds
    z_mean = z_bg.mean(axis=0)
    phi = model.coefficients * (z - z_mean)
    base = model.intercept + float(model.coefficients @ z_mean)
    return Attribution(base_value=base, phi=phi, timestamp=timestamp)


# ---------------------------------------------------------------------------
# Exhaustive oracle


def brute_force_shapley(value_fn: Callable[[frozenset], float], n_features: int) -> np.ndarray:
    """Shapley values by full coalition enumeration (n <= 15).

    ``value_fn`` maps a frozenset of feature indices to the coalition's
    value.
    """
    if n_features > BRUTE_FORCE_MAX_FEATURES:
        raise ValidationError(
            f"brute force limited to {BRUTE_FORCE_MAX_FEATURES} features, got {n_features}"
        )
    if n_features < 1:
        raise ValidationError("need at least one feature")
    n = n_features
    values = {}
    for mask in range(1 << n):
        values[mask] = float(value_fn(frozenset(j for j in range(n) if mask >> j & 1)))
    fact = [math.factorial(i) for i in range(n + 1)]
    phi = np.zeros(n)
    for j in range(n):
        bit = 1 << j
        acc = 0.0
        for mask in range(1 << n):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            w = fact[s] * fact[n - s - 1] / fact[n]
            acc += w * (values[mask | bit] - values[mask])
        phi[j] = acc
    return phi


def _conditional_expectation(node: TreeNode, x: np.ndarray, coalition: frozenset) -> float:
    """Follow the instance on coalition features, cover-average elsewhere."""
    if node.is_leaf:
        return node.value
    if node.feature in coalition:
        child = node.left if x[node.feature] <= node.threshold else node.right
        return _conditional_expectation(child, x, coalition)
    return (
        node.left.cover * _conditional_expectation(node.left, x, coalition)
        + node.right.cover * _conditional_expectation(node.right, x, coalition)
    ) / node.cover


def tree_coalition_value(model: EnsembleModel, instance: np.ndarray) -> Callable[[frozenset], float]:
    """The path-dependent value function of an ensemble, for the oracle."""
    x = np.asarray(instance, dtype=float).ravel()

    def value(coalition: frozenset) -> float:
        parts = [_conditional_expectation(t, x, coalition) for t in model.trees]
        if model.kind == EXTRA_TREES:
            return float(np.mean(parts))
        return model.base_score + model.learning_rate * float(np.sum(parts))

    return value


def background_mean_value(
    predict_fn: Callable[[np.ndarray], np.ndarray],
    instance: np.ndarray,
    background_X: np.ndarray,
) -> Callable[[frozenset], float]:
    """Model-agnostic value function: features outside the coalition are
    replaced by the background column means."""
    x = np.asarray(instance, dtype=float).ravel()
    bg_mean = np.asarray(background_X, dtype=float).mean(axis=0)

    def value(coalition: frozenset) -> float:
        row = bg_mean.copy()
        for j in coalition:
            row[j] = x[j]
        return float(np.asarray(predict_fn(row.reshape(1, -1)))[0])

    return value


def agnostic_shap(
    model,
    instance: np.ndarray,
    background_X: np.ndarray,
    timestamp: date | None = None,
) -> Attribution:
    """Exact Shapley values under background-mean substitution; used for
    models without a specialized algorithm (e.g. the GRU). Feature count
    must not exceed the brute-force limit."""
    x = np.asarray(instance, dtype=float).ravel()
    value = background_mean_value(model.predict, x, background_X)
    phi = brute_force_shapley(value, x.shape[0])
    return Attribution(base_value=value(frozenset()), phi=phi, timestamp=timestamp)


# ---------------------------------------------------------------------------
# Aggregation over test sets


def shap_for_model(model, instance, background_X=None, timestamp=None) -> Attribution:
    """Dispatch to the attribution method matching the model family."""
    if isinstance(model, EnsembleModel):
        return tree_shap(model, instance, timestamp=timestamp)
    if isinstance(model, LinearModel):
        if background_X is None:
            raise MethodError("linear attribution needs a background dataset")
        return linear_shap(model, instance, background_X, timestamp=timestamp)
    if background_X is None:
        raise MethodError("model-agnostic attribution needs a background dataset")
    return agnostic_shap(model, instance, background_X, timestamp=timestamp)


def mean_abs_shap(attributions: Sequence[Attribution], feature_names: Sequence[str]) -> ImportanceReport:
    """Average |phi| per feature, rescaled to [0, 1]."""
    if not attributions:
        raise ValidationError("no attributions to aggregate")
    mat = np.stack([a.phi for a in attributions])
    return _make_report("mean_abs_shap", feature_names, np.abs(mat).mean(axis=0))


def shap_timeseries(
    model,
    dataset: SupervisedDataset,
    background_X: np.ndarray | None = None,
) -> list[Attribution]:
    """One signed attribution per dataset row, in timestamp order."""
    out = []
    for i in range(dataset.n_rows):
        out.append(
            shap_for_model(
                model,
                dataset.X[i],
                background_X=background_X,
                timestamp=dataset.timestamps[i],
            )
        )
    return out
