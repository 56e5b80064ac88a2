import json

import numpy as np
import pytest

from fddsense.dataset import FAULT_CLASSES
from fddsense.ensembles import (
    EnsembleConfig,
    EnsembleModel,
    evaluate,
    feature_importance,
    fit_ensemble,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    predict_batch,
    predict_scores,
    rank_features,
    save_model,
)
from fddsense.errors import (
    DimensionMismatchError,
    ModelFormatError,
    SchemaMismatchError,
    SingleClassError,
)
from fddsense.fileio import canonical_json
from fddsense.simgen import GeneratorConfig, generate_dataset
from fddsense.trees import DecisionTree, Internal, Leaf, SplitCandidate, TreeConfig, fit_tree


def _leaf(n):
    return Leaf(n_samples=n, distribution=np.array([1.0, 0.0]))


def _tree(root):
    return DecisionTree(root=root, n_features=2, config=TreeConfig(), n_classes=2)


def _model(trees):
    return EnsembleModel(
        config=EnsembleConfig(method="bagging", n_trees=len(trees)),
        trees=trees,
        n_classes=2,
        feature_names=("a", "b"),
    )


def hand_model_a():
    """Tree 1: f0 at the root, f1 on the right child (6 of 10 rows).
    Tree 2: f1 at the root, f0 on the left child (5 of 10 rows)."""
    t1 = _tree(
        Internal(
            split=SplitCandidate(0, 2.0, 0.18, 1.8, 4, 6),
            left=_leaf(4),
            right=Internal(
                split=SplitCandidate(1, 0.5, 0.2, 1.2, 3, 3), left=_leaf(3), right=_leaf(3)
            ),
        )
    )
    t2 = _tree(
        Internal(
            split=SplitCandidate(1, 1.0, 0.3, 3.0, 5, 5),
            left=Internal(
                split=SplitCandidate(0, 4.0, 0.1, 0.5, 2, 3), left=_leaf(2), right=_leaf(3)
            ),
            right=_leaf(5),
        )
    )
    return _model([t1, t2])


def hand_model_b():
    """Both trees split only f0; tree 2 splits it twice."""
    t1 = _tree(
        Internal(split=SplitCandidate(0, 1.0, 0.5, 5.0, 5, 5), left=_leaf(5), right=_leaf(5))
    )
    t2 = _tree(
        Internal(
            split=SplitCandidate(0, 2.0, 0.25, 2.5, 4, 6),
            left=Internal(
                split=SplitCandidate(0, 0.5, 0.2, 0.8, 2, 2), left=_leaf(2), right=_leaf(2)
            ),
            right=_leaf(6),
        )
    )
    return _model([t1, t2])


class TestHandComputedImportance:
    def test_model_a_impurity(self):
        out = feature_importance(hand_model_a(), mode="impurity")
        assert out[0] == pytest.approx((1.0 * 0.18 + 0.5 * 0.1) / 2, abs=1e-12)
        assert out[1] == pytest.approx((0.6 * 0.2 + 1.0 * 0.3) / 2, abs=1e-12)

    def test_model_a_gain_normalised(self):
        out = feature_importance(hand_model_a(), mode="gain")
        assert out[0] == pytest.approx(2.3 / 6.5, abs=1e-12)
        assert out[1] == pytest.approx(4.2 / 6.5, abs=1e-12)
        assert out.sum() == pytest.approx(1.0, abs=1e-9)

    def test_model_b_impurity(self):
        out = feature_importance(hand_model_b(), mode="impurity")
        assert out[0] == pytest.approx((0.5 + (0.25 + 0.4 * 0.2)) / 2, abs=1e-12)
        assert out[1] == 0.0

    def test_model_b_gain_normalised(self):
        out = feature_importance(hand_model_b(), mode="gain")
        assert out.tolist() == [1.0, 0.0]

    def test_rank_features_orders_and_breaks_ties_by_schema(self):
        ranked = rank_features(hand_model_a(), mode="impurity")
        assert [s for s, _ in ranked] == ["b", "a"]
        stump = _model(
            [
                _tree(
                    Internal(
                        split=SplitCandidate(0, 1.0, 0.2, 2.0, 5, 5),
                        left=_leaf(5),
                        right=_leaf(5),
                    )
                ),
                _tree(
                    Internal(
                        split=SplitCandidate(1, 1.0, 0.2, 2.0, 5, 5),
                        left=_leaf(5),
                        right=_leaf(5),
                    )
                ),
            ]
        )
        assert [s for s, _ in rank_features(stump)] == ["a", "b"]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            feature_importance(hand_model_a(), mode="permutation")


def training_data(n=900, seed=4):
    d = generate_dataset(GeneratorConfig(n_rows=n), seed)
    cols = [d.sensor_index(s) for s in ("T_FI", "T_FO", "T_C", "W6")]
    return d.select_sensors(cols)


class TestBagging:
    def test_single_tree_no_bootstrap_equals_plain_tree(self):
        d = training_data()
        cfg = EnsembleConfig(
            method="bagging",
            n_trees=1,
            tree=TreeConfig(max_depth=6, feature_subsample=None),
            bootstrap=False,
        )
        model = fit_ensemble(d.values, d.labels, cfg, 123, d.symbols)
        tree = fit_tree(d.values, d.labels, cfg.tree, rng_seed=0, n_classes=d.n_classes)
        assert np.array_equal(
            predict_batch(model, d.values),
            np.argmax(tree.predict_batch(d.values), axis=1),
        )

    def test_deterministic_and_seed_sensitive(self):
        d = training_data()
        cfg = EnsembleConfig(n_trees=5, tree=TreeConfig(max_depth=5, feature_subsample=2))
        a = fit_ensemble(d.values, d.labels, cfg, 7, d.symbols)
        b = fit_ensemble(d.values, d.labels, cfg, 7, d.symbols)
        c = fit_ensemble(d.values, d.labels, cfg, 8, d.symbols)
        assert canonical_json(model_to_dict(a)) == canonical_json(model_to_dict(b))
        assert canonical_json(model_to_dict(a)) != canonical_json(model_to_dict(c))

    def test_thread_count_does_not_change_model(self):
        d = training_data()
        cfg = EnsembleConfig(n_trees=6, tree=TreeConfig(max_depth=5, feature_subsample=2))
        one = fit_ensemble(d.values, d.labels, cfg, 7, d.symbols, n_threads=1)
        four = fit_ensemble(d.values, d.labels, cfg, 7, d.symbols, n_threads=4)
        assert canonical_json(model_to_dict(one)) == canonical_json(model_to_dict(four))

    def test_soft_scores_sum_to_one(self):
        d = training_data()
        cfg = EnsembleConfig(n_trees=4, tree=TreeConfig(max_depth=4))
        model = fit_ensemble(d.values, d.labels, cfg, 3, d.symbols)
        scores = predict_scores(model, d.values[:50])
        assert np.allclose(scores.sum(axis=1), 1.0, atol=1e-9)
        assert scores.shape == (50, d.n_classes)

    def test_hard_vote_fractions(self):
        d = training_data()
        cfg = EnsembleConfig(
            n_trees=4, tree=TreeConfig(max_depth=4, feature_subsample=2), hard_vote=True
        )
        model = fit_ensemble(d.values, d.labels, cfg, 3, d.symbols)
        scores = predict_scores(model, d.values[:20])
        # Each row's scores are multiples of 1/4 summing to 1.
        assert np.allclose(scores.sum(axis=1), 1.0)
        assert np.allclose((scores * 4) % 1.0, 0.0)

    def test_predict_single_row(self):
        d = training_data()
        cfg = EnsembleConfig(n_trees=3, tree=TreeConfig(max_depth=4))
        model = fit_ensemble(d.values, d.labels, cfg, 3, d.symbols)
        assert predict(model, d.values[0]) == predict_batch(model, d.values[:1])[0]


class TestBoosting:
    def test_more_rounds_fit_training_data_better(self):
        d = training_data()
        tree = TreeConfig(max_depth=3, min_leaf=5)
        short = fit_ensemble(
            d.values, d.labels,
            EnsembleConfig(method="boosting", n_trees=1, tree=tree, learning_rate=0.3),
            5, d.symbols,
        )
        long = fit_ensemble(
            d.values, d.labels,
            EnsembleConfig(method="boosting", n_trees=10, tree=tree, learning_rate=0.3),
            5, d.symbols,
        )
        acc_short = float(np.mean(predict_batch(short, d.values) == d.labels))
        acc_long = float(np.mean(predict_batch(long, d.values) == d.labels))
        assert acc_long >= acc_short
        assert acc_long > 0.95

    def test_one_tree_per_class_per_round(self):
        d = training_data()
        cfg = EnsembleConfig(method="boosting", n_trees=3, tree=TreeConfig(max_depth=2))
        model = fit_ensemble(d.values, d.labels, cfg, 5, d.symbols)
        assert len(model.trees) == 3 * d.n_classes
        assert model.base_scores.shape == (d.n_classes,)

    def test_base_scores_are_log_priors(self):
        d = training_data()
        cfg = EnsembleConfig(method="boosting", n_trees=1, tree=TreeConfig(max_depth=2))
        model = fit_ensemble(d.values, d.labels, cfg, 5, d.symbols)
        counts = np.bincount(d.labels, minlength=d.n_classes)
        assert np.allclose(model.base_scores, np.log(counts / d.n_rows), atol=1e-12)

    def test_deterministic(self):
        d = training_data()
        cfg = EnsembleConfig(method="boosting", n_trees=2, tree=TreeConfig(max_depth=3))
        a = fit_ensemble(d.values, d.labels, cfg, 6, d.symbols)
        b = fit_ensemble(d.values, d.labels, cfg, 6, d.symbols)
        assert canonical_json(model_to_dict(a)) == canonical_json(model_to_dict(b))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EnsembleConfig(method="boosting", learning_rate=0.0)
        with pytest.raises(ValueError):
            EnsembleConfig(method="boosting", learning_rate=1.5)
        with pytest.raises(ValueError):
            EnsembleConfig(method="boosting", hard_vote=True)
        with pytest.raises(ValueError):
            EnsembleConfig(method="stacking")
        with pytest.raises(ValueError):
            EnsembleConfig(n_trees=0)


class TestInputValidation:
    def test_single_class_rejected(self):
        d = training_data()
        rows = np.flatnonzero(d.labels == 0)
        with pytest.raises(SingleClassError):
            fit_ensemble(
                d.values[rows], d.labels[rows], EnsembleConfig(n_trees=2), 0, d.symbols
            )

    def test_shape_mismatches_rejected(self):
        d = training_data()
        with pytest.raises(DimensionMismatchError):
            fit_ensemble(d.values, d.labels[:-1], EnsembleConfig(), 0, d.symbols)
        with pytest.raises(DimensionMismatchError):
            fit_ensemble(d.values, d.labels, EnsembleConfig(), 0, ("a", "b"))

    def test_evaluate_checks_schema(self):
        d = training_data()
        cfg = EnsembleConfig(n_trees=2, tree=TreeConfig(max_depth=3))
        model = fit_ensemble(d.values, d.labels, cfg, 1, d.symbols)
        other = d.select_sensors([0, 1, 2, 3])  # same width, renamed later
        report = evaluate(model, d)
        assert 0.0 <= report.macro_f1 <= 1.0
        assert report.class_names == tuple(fc.name for fc in FAULT_CLASSES)
        shuffled = d.select_sensors([1, 0, 2, 3])
        with pytest.raises(SchemaMismatchError):
            evaluate(model, shuffled)
        assert other.symbols == d.symbols  # selecting all columns keeps names


class TestSerialization:
    def test_roundtrip_bagging(self, tmp_path):
        d = training_data()
        cfg = EnsembleConfig(n_trees=3, tree=TreeConfig(max_depth=4, feature_subsample=2))
        model = fit_ensemble(d.values, d.labels, cfg, 9, d.symbols)
        path = tmp_path / "model.json"
        save_model(model, path)
        clone = load_model(path)
        assert clone.feature_names == model.feature_names
        assert clone.fingerprint == model.fingerprint
        assert np.array_equal(predict_batch(clone, d.values), predict_batch(model, d.values))
        assert canonical_json(model_to_dict(clone)) == canonical_json(model_to_dict(model))

    def test_roundtrip_boosting(self, tmp_path):
        d = training_data()
        cfg = EnsembleConfig(method="boosting", n_trees=2, tree=TreeConfig(max_depth=3))
        model = fit_ensemble(d.values, d.labels, cfg, 9, d.symbols)
        path = tmp_path / "model.json"
        save_model(model, path)
        clone = load_model(path)
        assert np.allclose(clone.base_scores, model.base_scores)
        assert np.array_equal(predict_batch(clone, d.values), predict_batch(model, d.values))

    def test_unknown_version_rejected(self):
        payload = model_to_dict(hand_model_a())
        payload["format_version"] = 999
        with pytest.raises(ModelFormatError):
            model_from_dict(payload)

    def test_missing_key_rejected(self):
        payload = model_to_dict(hand_model_a())
        del payload["trees"]
        with pytest.raises(ModelFormatError):
            model_from_dict(payload)

    def test_non_json_file_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("not json at all {")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_saved_file_is_canonical_json(self, tmp_path):
        model = hand_model_a()
        path = tmp_path / "model.json"
        save_model(model, path)
        text = path.read_text()
        assert text == canonical_json(json.loads(text))
