import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcforecast.classifiers import (
    BaggedTrees,
    ConstantModel,
    DecisionTree,
    NaiveBayes,
    TreeNode,
    UndefinedAUCError,
    auc,
    cross_validate,
    f_measure,
    predict_score,
    stratified_folds,
    train,
)
from lcforecast.features import FeatureMatrix


def _matrix(X, y):
    X = np.asarray(X, dtype=np.float64)
    return FeatureMatrix([f"p{i:03d}" for i in range(len(y))], X, np.asarray(y, dtype=np.int64), "gender")


def brute_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


class TestAUC:
    def test_perfect(self):
        assert auc([0.9, 0.8, 0.4, 0.3], [1, 1, 0, 0]) == 1.0

    def test_one_swap(self):
        assert auc([0.9, 0.4, 0.8, 0.3], [1, 1, 0, 0]) == 0.75

    def test_all_tied(self):
        assert auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(UndefinedAUCError):
            auc([0.1, 0.2], [1, 1])

    def test_brute_force_200_datasets(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            scores = rng.integers(0, 4, n) / 4.0
            assert auc(scores, labels) == brute_auc(scores, labels)

    @given(st.lists(st.tuples(st.integers(-50, 50), st.integers(0, 1)), min_size=2, max_size=30))
    def test_monotone_invariance_and_flip(self, data):
        scores = np.array([s / 10.0 for s, _ in data])
        labels = np.array([l for _, l in data])
        if labels.min() == labels.max():
            return
        a = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(a, abs=1e-12)
        assert a + auc(scores, 1 - labels) == pytest.approx(1.0, abs=1e-12)


class TestFMeasure:
    def test_perfect(self):
        assert f_measure([1, 0, 1], [1, 0, 1]) == 1.0

    def test_all_positive(self):
        assert f_measure([1, 1], [1, 0]) == pytest.approx(1 / 3, abs=1e-12)

    def test_complement(self):
        assert f_measure([0, 1, 0, 1], [1, 0, 1, 0]) == 0.0


class TestModels:
    def test_separable_pair(self):
        tree = DecisionTree.fit(np.array([[0.0], [10.0]]), np.array([0, 1]), min_leaf=1)
        assert tree.root.feature == 0 and tree.root.threshold == 5.0
        assert tree.root.left.n_pos == 0 and tree.root.right.n_pos == 1
        assert tree.root.left.n == tree.root.right.n == 1

    def test_laplace_leaf(self):
        assert TreeNode(n=3, n_pos=3).score == pytest.approx(0.8)

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(200, 5))
        y = (X[:, 0] + rng.normal(size=200) > 0).astype(int)
        tree = DecisionTree.fit(X, y, max_depth=8, min_leaf=5)
        for leaf in tree.root.leaves():
            assert leaf.n >= 5 or leaf.n_pos in (0, leaf.n)
        assert tree.root.depth() <= 8

    def test_nb_symmetric_data(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0], [3.0, 4.0]])
        nb = NaiveBayes.fit(X, np.array([0, 0, 1, 1]))
        s = nb.predict_scores(np.array([[0.0, 0.0], [2.0, 3.0], [9.0, -9.0]]))
        np.testing.assert_allclose(s, 0.5, atol=1e-9)

    def test_nb_priors_and_floor(self):
        X = np.ones((6, 2))
        X[:, 1] = np.arange(6)
        nb = NaiveBayes.fit(X, np.array([0, 0, 0, 0, 1, 1]))
        assert nb.priors.sum() == pytest.approx(1.0)
        assert (nb.variances > 0).all()

    def test_nb_separates(self):
        rng = np.random.default_rng(1)
        X = np.vstack([rng.normal(0, 1, (50, 3)), rng.normal(3, 1, (50, 3))])
        y = np.repeat([0, 1], 50)
        assert auc(NaiveBayes.fit(X, y).predict_scores(X), y) > 0.95

    def test_bagging_one_tree_without_bootstrap(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 4))
        y = (X[:, 1] > 0).astype(int)
        bag = BaggedTrees.fit(X, y, seed=3, n_trees=1, bootstrap=False)
        np.testing.assert_array_equal(bag.predict_scores(X), DecisionTree.fit(X, y).predict_scores(X))

    def test_degenerate_model(self):
        m = _matrix(np.zeros((4, 2)), [1, 1, 1, 1])
        model = train("decision_tree", m)
        assert isinstance(model, ConstantModel)
        assert predict_score(model, np.zeros(2)) == 1.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            train("svm", _matrix(np.zeros((2, 1)), [0, 1]))

    def test_bagging_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 3))
        y = (X[:, 0] > 0).astype(int)
        a = BaggedTrees.fit(X, y, seed=7).predict_scores(X)
        b = BaggedTrees.fit(X, y, seed=7).predict_scores(X)
        np.testing.assert_array_equal(a, b)


class TestCrossValidation:
    def test_exact_stratification(self):
        y = np.array([0, 1] * 10)
        for fold in stratified_folds(y, 10, seed=4):
            assert sorted(y[fold].tolist()) == [0, 1]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 40), st.integers(0, 40), st.integers(2, 10), st.integers(0, 2**32))
    def test_partition_and_balance(self, n0, n1, k, seed):
        y = np.array([0] * n0 + [1] * n1)
        folds = stratified_folds(y, k, seed)
        allrows = np.sort(np.concatenate(folds)) if folds else np.array([])
        assert np.array_equal(allrows, np.arange(y.size))
        for c in (0, 1):
            counts = [int((y[f] == c).sum()) for f in folds]
            assert max(counts) - min(counts) <= 1
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        m = _matrix(rng.normal(size=(40, 4)), [0, 1] * 20)
        assert cross_validate("bagged_trees", m, seed=5).to_json() == cross_validate("bagged_trees", m, seed=5).to_json()

    def test_leave_one_out_warning(self):
        m = _matrix(np.arange(6, dtype=float)[:, None], [0, 1, 0, 1, 0, 1])
        rep = cross_validate("naive_bayes", m, seed=1)
        assert rep.n_folds == 6 and rep.warnings

    def test_report_schema(self):
        rng = np.random.default_rng(9)
        rep = cross_validate("decision_tree", _matrix(rng.normal(size=(30, 3)), [0, 1] * 15), seed=2, task="gender")
        d = rep.to_dict()
        assert {"task", "model", "auc", "f", "folds", "n", "seed"} <= set(d)
        assert len(d["folds"]) == 10 and d["n"] == 30
        assert 0 <= d["auc"] <= 1 and 0 <= d["f"] <= 1

    @pytest.mark.parametrize("kind", ["naive_bayes", "decision_tree", "bagged_trees"])
    def test_null_labels_near_half(self, kind):
        aucs = []
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            X = rng.normal(size=(200, 5))
            y = rng.permutation(np.repeat([0, 1], 100))
            aucs.append(cross_validate(kind, _matrix(X, y), seed=seed).auc)
        assert 0.4 <= np.mean(aucs) <= 0.6
