import numpy as np
import pytest

from fddsense.errors import (
    DimensionMismatchError,
    EmptyInputError,
    EmptyNodeError,
    NonFiniteInputError,
)
from fddsense.trees import (
    DecisionTree,
    Internal,
    Leaf,
    SplitCandidate,
    TreeConfig,
    fit_tree,
    gini_impurity,
    predict_tree,
    tree_from_dict,
    tree_importance_contributions,
    tree_to_dict,
)

from oracle_trees import oracle_fit, oracle_gini, random_case


def assert_same_tree(node, ref):
    if ref["kind"] == "leaf":
        assert isinstance(node, Leaf)
        assert list(node.distribution) == ref["distribution"]
    else:
        assert isinstance(node, Internal)
        assert node.split.feature_index == ref["feature"]
        assert node.split.threshold == ref["threshold"]
        assert_same_tree(node.left, ref["left"])
        assert_same_tree(node.right, ref["right"])


def walk(node):
    yield node
    if isinstance(node, Internal):
        yield from walk(node.left)
        yield from walk(node.right)


class TestGini:
    def test_pure_node_is_zero(self):
        assert gini_impurity([5, 0]) == 0.0

    def test_even_binary_split(self):
        assert gini_impurity([5, 5]) == 0.5

    def test_three_way_tie(self):
        assert abs(gini_impurity([2, 2, 2]) - 2.0 / 3.0) <= 1e-15

    def test_matches_bruteforce_on_random_counts(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            labels = [int(v) for v in rng.integers(0, 4, size=rng.integers(1, 30))]
            counts = np.bincount(labels, minlength=4)
            assert gini_impurity(counts) == oracle_gini(labels)

    def test_empty_node_rejected(self):
        with pytest.raises(EmptyNodeError):
            gini_impurity([0, 0, 0])

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            gini_impurity([3, -1])


class TestFitAgainstOracle:
    def test_two_cluster_toy(self):
        x = np.array([[0.0], [1.0], [10.0], [11.0]])
        y = np.array([0, 0, 1, 1])
        tree = fit_tree(x, y, TreeConfig())
        root = tree.root
        assert isinstance(root, Internal)
        assert root.split.feature_index == 0
        assert 1.0 < root.split.threshold < 10.0
        assert isinstance(root.left, Leaf) and isinstance(root.right, Leaf)
        assert list(root.left.distribution) == [1.0, 0.0]
        assert list(root.right.distribution) == [0.0, 1.0]

    def test_matches_bruteforce_randomized(self):
        rng = np.random.default_rng(2024)
        for case in range(200):
            rows, labels = random_case(rng)
            min_leaf = 1 if case % 3 else 2
            max_depth = None if case % 4 else 2
            cfg = TreeConfig(max_depth=max_depth, min_leaf=min_leaf)
            tree = fit_tree(np.array(rows), np.array(labels), cfg, n_classes=3)
            ref = oracle_fit(rows, labels, max_depth=max_depth, min_leaf=min_leaf, n_classes=3)
            assert_same_tree(tree.root, ref)


class TestGrowthControls:
    def setup_method(self):
        rng = np.random.default_rng(5)
        self.x = rng.normal(0, 1, size=(200, 3))
        self.y = (self.x[:, 0] + 0.3 * rng.normal(size=200) > 0).astype(int)

    def test_min_leaf_respected(self):
        tree = fit_tree(self.x, self.y, TreeConfig(min_leaf=17))
        for node in walk(tree.root):
            if isinstance(node, Leaf):
                assert node.n_samples >= 17

    def test_max_depth_respected(self):
        tree = fit_tree(self.x, self.y, TreeConfig(max_depth=2))

        def depth(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        assert depth(tree.root) <= 2

    def test_max_depth_zero_is_a_stump(self):
        tree = fit_tree(self.x, self.y, TreeConfig(max_depth=0))
        assert isinstance(tree.root, Leaf)

    def test_pure_labels_give_single_leaf(self):
        tree = fit_tree(self.x, np.zeros(200, dtype=int), TreeConfig(), n_classes=2)
        assert isinstance(tree.root, Leaf)
        assert list(tree.root.distribution) == [1.0, 0.0]

    def test_constant_features_give_single_leaf(self):
        x = np.full((30, 2), 7.5)
        y = np.arange(30) % 2
        tree = fit_tree(x, y, TreeConfig())
        assert isinstance(tree.root, Leaf)

    def test_too_few_rows_rejected(self):
        with pytest.raises(EmptyInputError):
            fit_tree(np.zeros((1, 2)), np.zeros(1, dtype=int), TreeConfig())

    def test_nonfinite_rejected(self):
        x = self.x.copy()
        x[3, 1] = np.nan
        with pytest.raises(NonFiniteInputError):
            fit_tree(x, self.y, TreeConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TreeConfig(min_leaf=0)
        with pytest.raises(ValueError):
            TreeConfig(split_strategy="quantile")
        with pytest.raises(ValueError):
            TreeConfig(split_strategy="histogram", histogram_bins=1)
        with pytest.raises(ValueError):
            TreeConfig(task="ordinal")


class TestHistogramStrategy:
    def test_equals_exact_when_bins_cover_distinct_values(self):
        rng = np.random.default_rng(9)
        x = rng.integers(0, 40, size=(300, 4)).astype(float)  # <= 40 distinct
        y = ((x[:, 0] > 20) | (x[:, 2] < 5)).astype(int)
        exact = fit_tree(x, y, TreeConfig(split_strategy="exact"))
        hist = fit_tree(x, y, TreeConfig(split_strategy="histogram", histogram_bins=64))
        assert tree_to_dict(exact)["root"] == tree_to_dict(hist)["root"]

    def test_coarse_bins_restrict_candidates(self):
        x = np.arange(100, dtype=float).reshape(-1, 1)
        y = (x[:, 0] < 30).astype(int)
        exact = fit_tree(x, y, TreeConfig(max_depth=1))
        hist = fit_tree(
            x, y, TreeConfig(max_depth=1, split_strategy="histogram", histogram_bins=4)
        )
        assert exact.root.split.threshold == 29.5
        # Only boundaries {0, 49, 98} survive thinning to 3 candidates.
        assert hist.root.split.threshold == 49.5


class TestFeatureSubsampling:
    def test_same_seed_same_tree(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(120, 6))
        y = (x[:, 1] > 0).astype(int)
        cfg = TreeConfig(feature_subsample=2)
        a = fit_tree(x, y, cfg, rng_seed=77)
        b = fit_tree(x, y, cfg, rng_seed=77)
        assert tree_to_dict(a) == tree_to_dict(b)

    def test_subsample_larger_than_feature_count_ignores_seed(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(80, 3))
        y = (x[:, 0] > 0).astype(int)
        cfg = TreeConfig(feature_subsample=10)
        a = fit_tree(x, y, cfg, rng_seed=1)
        b = fit_tree(x, y, cfg, rng_seed=2)
        assert tree_to_dict(a) == tree_to_dict(b)


class TestRegressionTask:
    def test_reduces_sse(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(300, 2))
        target = np.where(x[:, 0] > 0, 2.0, -2.0) + 0.1 * rng.normal(size=300)
        cfg = TreeConfig(task="regression_on_gradients", max_depth=3, min_leaf=5)
        tree = fit_tree(x, target, cfg)
        fitted = tree.predict_batch(x)
        sse_model = float(np.sum((target - fitted) ** 2))
        sse_mean = float(np.sum((target - target.mean()) ** 2))
        assert sse_model < 0.2 * sse_mean

    def test_constant_target_gives_single_leaf(self):
        rng = np.random.default_rng(22)
        x = rng.normal(size=(50, 2))
        cfg = TreeConfig(task="regression_on_gradients")
        tree = fit_tree(x, np.full(50, 3.25), cfg)
        assert isinstance(tree.root, Leaf)
        assert tree.root.value == 3.25

    def test_leaf_value_is_mean(self):
        x = np.array([[0.0], [0.0], [10.0], [10.0]])
        target = np.array([1.0, 2.0, 10.0, 14.0])
        cfg = TreeConfig(task="regression_on_gradients", max_depth=1)
        tree = fit_tree(x, target, cfg)
        assert tree.root.left.value == 1.5
        assert tree.root.right.value == 12.0


class TestPrediction:
    def setup_method(self):
        rng = np.random.default_rng(31)
        self.x = rng.normal(size=(150, 4))
        self.y = ((self.x[:, 0] > 0) & (self.x[:, 3] < 1)).astype(int)
        self.tree = fit_tree(self.x, self.y, TreeConfig(max_depth=4))

    def test_batch_matches_single_row(self):
        batch = self.tree.predict_batch(self.x[:20])
        for i in range(20):
            assert np.array_equal(predict_tree(self.tree, self.x[i]), batch[i])

    def test_wrong_width_rejected(self):
        with pytest.raises(DimensionMismatchError):
            predict_tree(self.tree, np.zeros(3))
        with pytest.raises(DimensionMismatchError):
            self.tree.predict_batch(np.zeros((5, 5)))

    def test_nonfinite_rejected(self):
        row = np.zeros(4)
        row[2] = np.inf
        with pytest.raises(NonFiniteInputError):
            predict_tree(self.tree, row)

    def test_training_rows_classified_correctly(self):
        # Fully grown tree on unique rows reproduces its training labels.
        tree = fit_tree(self.x, self.y, TreeConfig())
        predicted = np.argmax(tree.predict_batch(self.x), axis=1)
        assert np.array_equal(predicted, self.y)


def hand_tree():
    """Root on feature 0 (10 rows), right child on feature 1 (6 rows)."""
    leaf = lambda n: Leaf(n_samples=n, distribution=np.array([1.0, 0.0]))
    child = Internal(
        split=SplitCandidate(1, 0.5, 0.2, 1.2, 3, 3),
        left=leaf(3),
        right=leaf(3),
    )
    root = Internal(
        split=SplitCandidate(0, 2.0, 0.18, 1.8, 4, 6),
        left=leaf(4),
        right=child,
    )
    return DecisionTree(root=root, n_features=2, config=TreeConfig(), n_classes=2)


class TestImportanceContributions:
    def test_split_log_weights(self):
        log = hand_tree().split_log
        assert [(r.feature_index, r.weight) for r in log] == [(0, 1.0), (1, 0.6)]

    def test_weighted_impurity_mode(self):
        out = tree_importance_contributions(hand_tree(), mode="impurity")
        assert out[0] == pytest.approx(0.18, abs=1e-15)
        assert out[1] == pytest.approx(0.6 * 0.2, abs=1e-15)

    def test_unweighted_impurity_mode(self):
        out = tree_importance_contributions(hand_tree(), mode="impurity", weighted=False)
        assert out[1] == pytest.approx(0.2, abs=1e-15)

    def test_gain_mode(self):
        out = tree_importance_contributions(hand_tree(), mode="gain")
        assert list(out) == [1.8, 1.2]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            tree_importance_contributions(hand_tree(), mode="split_count")


class TestSerialization:
    def test_roundtrip_preserves_predictions_and_encoding(self):
        rng = np.random.default_rng(41)
        x = rng.normal(size=(100, 3))
        y = (x[:, 0] * x[:, 1] > 0).astype(int)
        tree = fit_tree(x, y, TreeConfig(max_depth=5, min_leaf=2))
        payload = tree_to_dict(tree)
        clone = tree_from_dict(payload)
        assert np.array_equal(tree.predict_batch(x), clone.predict_batch(x))
        assert tree_to_dict(clone) == payload

    def test_regression_roundtrip(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(60, 2))
        cfg = TreeConfig(task="regression_on_gradients", max_depth=3)
        tree = fit_tree(x, x[:, 0] * 2.0, cfg)
        clone = tree_from_dict(tree_to_dict(tree))
        assert clone.n_classes is None
        assert np.array_equal(tree.predict_batch(x), clone.predict_batch(x))
