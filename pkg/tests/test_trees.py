import numpy as np
import pytest

from fxcast.errors import ValidationError
from fxcast.trees import (
    GREEDY_EXACT,
    RANDOM_THRESHOLD,
    EnsembleModel,
    TreeHyperparams,
    TreeNode,
    fit_extra_trees,
    fit_gbm,
    fit_tree,
    tree_predict,
)


def walk_nodes(node):
    yield node
    if not node.is_leaf:
        yield from walk_nodes(node.left)
        yield from walk_nodes(node.right)


def route(node, x):
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


# ---------------------------------------------------------------------------
# single trees


def test_constant_target_gives_single_leaf():
    X = np.arange(10.0).reshape(-1, 1)
    y = np.full(10, 3.5)
    tree = fit_tree(X, y, max_depth=5)
    assert tree.is_leaf
    assert tree.value == 3.5
    assert tree.cover == 10


def test_greedy_split_at_midpoint():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    tree = fit_tree(X, y, max_depth=1)
    assert not tree.is_leaf
    assert tree.feature == 0
    assert tree.threshold == 2.5
    assert tree.left.value == 0.0
    assert tree.right.value == 10.0
    # enumerating the three candidate midpoints confirms 2.5 is optimal
    def sse(v):
        return np.sum((v - v.mean()) ** 2) if v.size else 0.0

    gains = {}
    for thr in (1.5, 2.5, 3.5):
        mask = X[:, 0] <= thr
        gains[thr] = sse(y) - sse(y[mask]) - sse(y[~mask])
    assert max(gains, key=gains.get) == 2.5
    assert tree.gain == pytest.approx(gains[2.5])


def test_max_depth_zero_predicts_mean():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([1.0, 2.0, 6.0])
    tree = fit_tree(X, y, max_depth=0)
    assert tree.is_leaf
    assert tree.value == pytest.approx(3.0)


def test_leaf_values_equal_node_means_brute_force(rng):
    for _ in range(10):
        n = int(rng.integers(5, 20))
        X = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        tree = fit_tree(X, y, max_depth=3)
        buckets = {}
        for i in range(n):
            leaf = route(tree, X[i])
            buckets.setdefault(id(leaf), ([], leaf))[0].append(y[i])
        for values, leaf in buckets.values():
            assert leaf.value == pytest.approx(np.mean(values), abs=1e-12)
            assert leaf.cover == len(values)


def test_gain_nonnegative_and_cover_conserved(rng):
    X = rng.normal(size=(60, 4))
    y = rng.normal(size=60)
    tree = fit_tree(X, y, max_depth=6)
    for node in walk_nodes(tree):
        if not node.is_leaf:
            assert node.gain >= 0.0
            assert node.cover == node.left.cover + node.right.cover
        assert node.cover >= 1
    assert tree.depth() <= 6


def test_depth_limit_respected(rng):
    X = rng.normal(size=(200, 3))
    y = rng.normal(size=200)
    for depth in (1, 2, 4):
        tree = fit_tree(X, y, max_depth=depth)
        assert tree.depth() <= depth


def test_random_threshold_mode_splits(rng):
    X = rng.normal(size=(50, 3))
    y = X[:, 0] * 2.0 + rng.normal(size=50) * 0.01
    tree = fit_tree(X, y, max_depth=4, mode=RANDOM_THRESHOLD, rng=np.random.default_rng(5))
    assert not tree.is_leaf
    for node in walk_nodes(tree):
        if not node.is_leaf:
            assert node.cover == node.left.cover + node.right.cover


# ---------------------------------------------------------------------------
# extra trees


def test_extra_trees_single_estimator_equals_one_tree(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    hp = TreeHyperparams(n_estimators=1, max_depth=3, max_features="sqrt", seed=11)
    forest = fit_extra_trees(X, y, hp)
    stream = np.random.SeedSequence(11).spawn(1)[0]
    single = fit_tree(X, y, max_depth=3, max_features="sqrt", mode=RANDOM_THRESHOLD,
                      rng=np.random.default_rng(stream))
    np.testing.assert_array_equal(forest.predict(X), tree_predict(single, X))


def test_extra_trees_constant_target(rng):
    X = rng.normal(size=(30, 4))
    y = np.full(30, 1.25)
    forest = fit_extra_trees(X, y, TreeHyperparams(n_estimators=5, max_depth=4, seed=0))
    np.testing.assert_allclose(forest.predict(rng.normal(size=(10, 4))), 1.25)


def test_extra_trees_deterministic_bytes(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    hp = TreeHyperparams(n_estimators=4, max_depth=3, seed=21)
    a = fit_extra_trees(X, y, hp).to_json()
    b = fit_extra_trees(X, y, hp).to_json()
    assert a == b
    c = fit_extra_trees(X, y, TreeHyperparams(n_estimators=4, max_depth=3, seed=22)).to_json()
    assert a != c


# ---------------------------------------------------------------------------
# gradient boosting


def test_gbm_single_stage_full_rate_fits_residuals_exactly():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([1.0, 5.0, 2.0, 8.0])
    hp = TreeHyperparams(n_estimators=1, max_depth=4, max_features="all", learning_rate=1.0, seed=0)
    model = fit_gbm(X, y, hp)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-12)


def test_gbm_stump_hand_run():
    X = np.array([[0.0], [1.0]])
    y = np.array([0.0, 10.0])
    hp = TreeHyperparams(n_estimators=1, max_depth=1, max_features="all", learning_rate=0.5, seed=0)
    model = fit_gbm(X, y, hp)
    np.testing.assert_allclose(model.predict(X), [2.5, 7.5])
    assert model.base_score == pytest.approx(5.0)


def test_gbm_training_mse_monotone(rng):
    X = rng.normal(size=(80, 4))
    y = X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(size=80) * 0.2
    hp = TreeHyperparams(n_estimators=30, max_depth=2, max_features="all", learning_rate=0.3, seed=1)
    model = fit_gbm(X, y, hp)
    preds = np.full(80, model.base_score)
    last = np.mean((y - preds) ** 2)
    for tree in model.trees:
        preds = preds + model.learning_rate * tree_predict(tree, X)
        mse = np.mean((y - preds) ** 2)
        assert mse <= last + 1e-12
        last = mse


def test_gbm_deterministic_bytes(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    hp = TreeHyperparams(n_estimators=5, max_depth=3, seed=33)
    assert fit_gbm(X, y, hp).to_json() == fit_gbm(X, y, hp).to_json()


# ---------------------------------------------------------------------------
# shared ensemble behaviour


def test_predict_dimension_mismatch(rng):
    X = rng.normal(size=(20, 3))
    y = rng.normal(size=20)
    model = fit_extra_trees(X, y, TreeHyperparams(n_estimators=2, max_depth=2, seed=0))
    with pytest.raises(ValidationError):
        model.predict(np.ones((4, 5)))


def test_ensemble_json_round_trip(rng):
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    model = fit_gbm(X, y, TreeHyperparams(n_estimators=3, max_depth=2, seed=2),
                    feature_names=["a", "b", "c"])
    clone = EnsembleModel.from_json(model.to_json())
    np.testing.assert_allclose(clone.predict(X), model.predict(X), atol=0)
    assert clone.feature_names == ("a", "b", "c")
    assert clone.to_json() == model.to_json()


def test_hyperparams_validation():
    with pytest.raises(ValidationError):
        TreeHyperparams(n_estimators=0)
    with pytest.raises(ValidationError):
        TreeHyperparams(max_features="median")
    with pytest.raises(ValidationError):
        TreeHyperparams(learning_rate=0.0)


def test_tree_node_serialization_round_trip():
    X = np.array([[1.0, 5.0], [2.0, 4.0], [3.0, 3.0], [4.0, 2.0]])
    y = np.array([0.0, 1.0, 4.0, 9.0])
    tree = fit_tree(X, y, max_depth=2)
    clone = TreeNode.from_dict(tree.to_dict())
    np.testing.assert_array_equal(tree_predict(clone, X), tree_predict(tree, X))
