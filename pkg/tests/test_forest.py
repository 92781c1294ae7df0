import json

import numpy as np
import pytest

from selectiveqa.errors import CatalogMismatchError, DegenerateLabelsError, ForestFormatError
from selectiveqa.features import BASE_CATALOG, extract_base_features
from selectiveqa.forest import (
    DecisionTree,
    ForestConfig,
    RandomForest,
    best_split,
    gini,
    grid_search,
    load_forest,
    predict_proba,
    predict_proba_matrix,
    save_forest,
    train_forest,
)

from .conftest import random_record_set


def oracle_best_split(X, y, features, min_samples_leaf=1):
    """Exhaustive enumeration over every (feature, midpoint) pair."""
    n = len(X)
    total_pos = sum(1 for v in y if v)
    p = total_pos / n
    g_parent = 2.0 * p * (1.0 - p)
    best = None  # (feature, threshold, decrease)
    for f in sorted(features):
        values = sorted(set(row[f] for row in X))
        for v1, v2 in zip(values, values[1:]):
            threshold = (v1 + v2) / 2.0
            left = [i for i in range(n) if X[i][f] <= threshold]
            n_l = len(left)
            n_r = n - n_l
            if n_l < min_samples_leaf or n_r < min_samples_leaf:
                continue
            pos_l = sum(1 for i in left if y[i])
            pos_r = total_pos - pos_l
            p_l = pos_l / n_l
            p_r = pos_r / n_r
            g_l = 2.0 * p_l * (1.0 - p_l)
            g_r = 2.0 * p_r * (1.0 - p_r)
            decrease = g_parent - (n_l * g_l + n_r * g_r) / n
            if decrease > 0.0 and (best is None or decrease > best[2]):
                best = (f, threshold, decrease)
    return best


class TestGini:
    def test_maximum_impurity(self):
        assert gini([True, True, False, False]) == 0.5

    def test_pure(self):
        assert gini([True, True, True]) == 0.0

    def test_quarter(self):
        assert gini([True, False, False, False]) == pytest.approx(0.375, abs=0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gini([])


class TestBestSplit:
    def test_one_dimensional_example(self):
        rows = np.array([[1.0], [2.0], [10.0], [11.0]])
        got = best_split(rows, [False, False, True, True], [0])
        assert got is not None
        assert (got.feature_index, got.threshold) == (0, 6.0)
        assert got.impurity_decrease == pytest.approx(0.5, abs=0)

    def test_pure_labels_give_none(self):
        rows = np.array([[1.0], [2.0], [3.0]])
        assert best_split(rows, [True, True, True], [0]) is None

    def test_identical_rows_different_labels_give_none(self):
        rows = np.array([[1.0, 2.0], [1.0, 2.0]])
        assert best_split(rows, [True, False], [0, 1]) is None

    def test_min_samples_leaf_respected(self):
        rows = np.array([[1.0], [2.0], [3.0], [4.0]])
        got = best_split(rows, [True, False, False, False], [0], min_samples_leaf=2)
        # the k=1 split is forbidden; only the middle threshold is legal
        assert got is None or got.threshold == 2.5

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 33))
            d = int(rng.integers(1, 5))
            msl = int(rng.integers(1, max(2, n // 2) + 1))
            if n < 2 * msl:
                msl = 1
            # small value grids provoke ties in both values and decreases
            if rng.random() < 0.5:
                X = rng.integers(0, 4, size=(n, d)).astype(float)
            else:
                X = np.round(rng.uniform(0, 1, size=(n, d)), 2)
            y = [bool(v) for v in rng.integers(0, 2, size=n)]
            got = best_split(X, y, list(range(d)), min_samples_leaf=msl)
            want = oracle_best_split(X.tolist(), y, range(d), min_samples_leaf=msl)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert (got.feature_index, got.threshold) == (want[0], want[1])
                assert got.impurity_decrease == want[2]


def _blobs(rng, n_per_class=500, sep=4.0):
    X = np.vstack(
        [
            rng.normal(0.0, 1.0, size=(n_per_class, 2)),
            rng.normal(sep, 1.0, size=(n_per_class, 2)),
        ]
    )
    y = [False] * n_per_class + [True] * n_per_class
    return X, y


class TestTrainForest:
    def test_single_tree_reproduces_recursive_best_split(self):
        X = np.array([[1.0], [2.0], [10.0], [11.0]])
        y = [False, False, True, True]
        cfg = ForestConfig(n_trees=1, bootstrap=False, features_per_split=1, seed=0)
        forest = train_forest(X, y, cfg)
        tree = forest.trees[0]
        assert tree.feature[0] == 0 and tree.threshold[0] == 6.0
        assert predict_proba_matrix(forest, X).tolist() == [0.0, 0.0, 1.0, 1.0]

    def test_bit_identical_reruns(self, tmp_path, rng):
        X, y = _blobs(rng, n_per_class=100)
        cfg = ForestConfig(n_trees=10, max_depth=6, seed=99)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_forest(train_forest(X, y, cfg), a)
        save_forest(train_forest(X, y, cfg), b)
        assert a.read_bytes() == b.read_bytes()

    def test_thread_count_does_not_change_result(self, tmp_path, rng):
        X, y = _blobs(rng, n_per_class=150)
        cfg = ForestConfig(n_trees=12, max_depth=7, seed=5)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_forest(train_forest(X, y, cfg, n_jobs=1), a)
        save_forest(train_forest(X, y, cfg, n_jobs=8), b)
        assert a.read_bytes() == b.read_bytes()

    def test_blobs_heldout_accuracy(self, rng):
        X, y = _blobs(rng)
        X_test, y_test = _blobs(rng)
        forest = train_forest(X, y, ForestConfig(n_trees=100, seed=1))
        pred = predict_proba_matrix(forest, X_test) > 0.5
        assert (pred == np.asarray(y_test)).mean() >= 0.95

    def test_full_depth_tree_fits_consistent_data(self, rng):
        X = rng.uniform(0, 1, size=(64, 3))
        y = [bool(v) for v in rng.integers(0, 2, size=64)]
        cfg = ForestConfig(n_trees=1, max_depth=None, bootstrap=False, features_per_split=3, seed=0)
        forest = train_forest(X, y, cfg)
        pred = predict_proba_matrix(forest, X) > 0.5
        assert (pred == np.asarray(y)).all()

    def test_degenerate_labels_rejected(self, rng):
        X = rng.uniform(0, 1, size=(10, 2))
        with pytest.raises(DegenerateLabelsError, match="degenerate labels"):
            train_forest(X, [True] * 10, ForestConfig(n_trees=2))

    def test_max_depth_bound_holds(self, rng):
        X, y = _blobs(rng, n_per_class=200, sep=1.0)
        forest = train_forest(X, y, ForestConfig(n_trees=5, max_depth=3, seed=2))
        assert all(t.max_path_length() <= 3 for t in forest.trees)

    def test_leaf_counts_respect_min_samples_leaf(self, rng):
        X, y = _blobs(rng, n_per_class=100, sep=1.0)
        forest = train_forest(
            X, y, ForestConfig(n_trees=5, min_samples_leaf=7, bootstrap=False, seed=3)
        )
        for tree in forest.trees:
            leaves = tree.feature < 0
            assert (tree.count[leaves] >= 7).all()


def _leaf_tree(prob):
    return DecisionTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0.0]),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        prob=np.array([prob]),
        count=np.array([10], dtype=np.int64),
    )


def _toy_forest(probs, n_features=2):
    names = tuple(f"f{i}" for i in range(n_features))
    cfg = ForestConfig(n_trees=len(probs))
    return RandomForest(trees=[_leaf_tree(p) for p in probs], config=cfg, feature_names=names)


class TestPredictProba:
    def test_mean_of_leaf_probs(self):
        forest = _toy_forest([0.2, 0.4, 0.9])
        fv = extract_base_features(random_record_set(np.random.default_rng(0), 1).records[0])
        forest = RandomForest(forest.trees, forest.config, BASE_CATALOG)
        assert predict_proba(forest, fv) == pytest.approx(0.5, abs=1e-15)

    def test_single_tree_identity(self):
        forest = _toy_forest([0.37])
        assert predict_proba_matrix(forest, np.zeros((1, 2)))[0] == 0.37

    def test_pure_positive_is_one(self):
        forest = _toy_forest([1.0, 1.0])
        assert predict_proba_matrix(forest, np.zeros((1, 2)))[0] == 1.0

    def test_monotone_under_added_certain_tree(self):
        base = _toy_forest([0.2, 0.4])
        better = _toy_forest([0.2, 0.4, 1.0])
        x = np.zeros((1, 2))
        assert predict_proba_matrix(better, x)[0] > predict_proba_matrix(base, x)[0]

    def test_catalog_mismatch_rejected(self):
        forest = _toy_forest([0.5])
        fv = extract_base_features(random_record_set(np.random.default_rng(0), 1).records[0])
        with pytest.raises(CatalogMismatchError):
            predict_proba(forest, fv)

    def test_bounds(self, rng):
        X, y = _blobs(rng, n_per_class=100, sep=1.0)
        forest = train_forest(X, y, ForestConfig(n_trees=20, seed=0))
        p = predict_proba_matrix(forest, rng.uniform(-3, 6, size=(200, 2)))
        assert (p >= 0.0).all() and (p <= 1.0).all()


class TestGridSearch:
    def _val_data(self, rng, n=200):
        rs = random_record_set(rng, n)
        X = np.asarray([extract_base_features(r).values for r in rs])
        y = [r.correct for r in rs]
        return rs, X, y

    def test_single_config_selected(self, rng):
        rs, X, y = self._val_data(rng)
        cfg = ForestConfig(n_trees=5, max_depth=4, seed=0)
        result = grid_search(X, y, X, list(rs), [cfg])
        assert result.best_config == cfg

    def test_degenerate_config_loses(self, rng):
        # correctness is a clean threshold on top_prob_1
        records = []
        from .conftest import make_record

        for i in range(300):
            top1 = float(rng.uniform(0.1, 0.9))
            records.append(
                make_record(
                    id=f"g{i}",
                    top_probs=(top1, 0.02, 0.01, 0.005, 0.0),
                    correct=top1 > 0.5,
                    passage_len=int(rng.integers(10, 50)),
                )
            )
        X = np.asarray([extract_base_features(r).values for r in records])
        y = [r.correct for r in records]
        stump = ForestConfig(n_trees=1, min_samples_leaf=300, bootstrap=False, seed=1)
        working = ForestConfig(n_trees=20, max_depth=6, seed=1)
        result = grid_search(X[:200], y[:200], X[200:], records[200:], [stump, working])
        assert result.best_config == working

    def test_selection_metric_matches_evaluation_auc(self, rng):
        from selectiveqa.confidence import ScoredRecord
        from selectiveqa.evaluation import auc, risk_coverage_curve

        rs, X, y = self._val_data(rng)
        cfg = ForestConfig(n_trees=8, max_depth=5, seed=2)
        result = grid_search(X[:150], y[:150], X[150:], list(rs.records[150:]), [cfg])
        confidences = predict_proba_matrix(result.best_forest, X[150:])
        scored = [ScoredRecord(r, float(c)) for r, c in zip(rs.records[150:], confidences)]
        assert result.val_auc == auc(risk_coverage_curve(scored))

    def test_tie_goes_to_earliest(self, rng):
        rs, X, y = self._val_data(rng, n=80)
        cfg = ForestConfig(n_trees=3, max_depth=3, seed=7)
        result = grid_search(X, y, X, list(rs), [cfg, cfg])
        assert result.best_config is cfg  # both entries identical; first wins

    def test_single_class_validation_rejected(self, rng):
        rs, X, y = self._val_data(rng)
        all_right = [r for r in rs if r.correct][:30]
        with pytest.raises(DegenerateLabelsError):
            grid_search(X, y, X[:30], all_right, [ForestConfig(n_trees=2)])


class TestPersistence:
    def test_round_trip_predictions(self, tmp_path, rng):
        X, y = _blobs(rng, n_per_class=100)
        forest = train_forest(X, y, ForestConfig(n_trees=10, max_depth=6, seed=11))
        path = tmp_path / "f.json"
        save_forest(forest, path)
        loaded = load_forest(path)
        probe = rng.uniform(-2, 6, size=(100, 2))
        assert (
            predict_proba_matrix(forest, probe) == predict_proba_matrix(loaded, probe)
        ).all()
        assert loaded.feature_names == forest.feature_names
        assert loaded.config == forest.config

    def test_truncated_file_rejected(self, tmp_path, rng):
        X, y = _blobs(rng, n_per_class=20)
        forest = train_forest(X, y, ForestConfig(n_trees=2, seed=0))
        path = tmp_path / "f.json"
        save_forest(forest, path)
        path.write_text(path.read_text()[: 100], encoding="utf-8")
        with pytest.raises(ForestFormatError, match="malformed"):
            load_forest(path)

    def test_wrong_version_rejected(self, tmp_path, rng):
        X, y = _blobs(rng, n_per_class=20)
        forest = train_forest(X, y, ForestConfig(n_trees=2, seed=0))
        path = tmp_path / "f.json"
        save_forest(forest, path)
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ForestFormatError, match="version"):
            load_forest(path)

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "f.json"
        path.write_text('{"format": "something-else", "version": 1}', encoding="utf-8")
        with pytest.raises(ForestFormatError, match="not a"):
            load_forest(path)
