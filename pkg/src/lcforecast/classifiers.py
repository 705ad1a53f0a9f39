"""From-scratch binary classifiers and their cross-validated evaluation.

Models: Gaussian Naive Bayes, an information-gain decision tree, and a bagged
ensemble of those trees.  All randomness comes from one integer seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .features import FeatureMatrix

MODEL_KINDS = ("naive_bayes", "decision_tree", "bagged_trees")


class UndefinedAUCError(ValueError):
    pass


# --------------------------------------------------------------------------- naive bayes


@dataclass
class NaiveBayes:
    priors: np.ndarray  # P(y=0), P(y=1)
    means: np.ndarray  # 2 x F
    variances: np.ndarray  # 2 x F
    kind: str = "naive_bayes"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "NaiveBayes":
        n, nf = X.shape
        floor = 1e-6 * (X.var(axis=0) + 1.0)
        means = np.zeros((2, nf))
        variances = np.tile(floor, (2, 1))
        counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=np.float64)
        priors = (counts + 1.0) / (n + 2.0)
        for c in (0, 1):
            rows = X[y == c]
            if len(rows):
                means[c] = rows.mean(axis=0)
                variances[c] = np.maximum(rows.var(axis=0), floor)
        return cls(priors, means, variances)

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        ll = np.empty((X.shape[0], 2))
        for c in (0, 1):
            var = self.variances[c]
            ll[:, c] = math.log(self.priors[c]) - 0.5 * (
                np.log(2 * np.pi * var) + (X - self.means[c]) ** 2 / var
            ).sum(axis=1)
        # P(y=1) = 1 / (1 + exp(l0 - l1)), stable for either sign
        d = ll[:, 0] - ll[:, 1]
        out = np.empty_like(d)
        pos = d >= 0
        e = np.exp(-d[pos])
        out[pos] = e / (1.0 + e)
        out[~pos] = 1.0 / (1.0 + np.exp(d[~pos]))
        return out


# --------------------------------------------------------------------------- decision tree


@dataclass
class TreeNode:
    n: int
    n_pos: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def score(self) -> float:
        return (self.n_pos + 1.0) / (self.n + 2.0)

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


def grow_tree(X: np.ndarray, y: np.ndarray, rows: np.ndarray, depth: int, max_depth: int, min_leaf: int) -> TreeNode:
    node = TreeNode(n=int(rows.size), n_pos=int(y[rows].sum()))
    if depth >= max_depth or node.n_pos in (0, node.n):
        return node
    xs = X[rows]
    order = np.argsort(xs, axis=0, kind="stable")
    f, pos, gain = kernels.split_sweep(xs, y[rows], order, min_leaf)
    if f < 0:
        return node
    col = xs[order[:, f], f]
    thr = 0.5 * (col[pos] + col[pos + 1])
    mask = xs[:, f] <= thr
    node.feature = int(f)
    node.threshold = float(thr)
    node.left = grow_tree(X, y, rows[mask], depth + 1, max_depth, min_leaf)
    node.right = grow_tree(X, y, rows[~mask], depth + 1, max_depth, min_leaf)
    return node


@dataclass
class DecisionTree:
    root: TreeNode
    kind: str = "decision_tree"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, max_depth: int = 6, min_leaf: int = 3) -> "DecisionTree":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        return cls(grow_tree(X, y, np.arange(len(y)), 0, max_depth, min_leaf))

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.array([self.leaf_for(x).score for x in X])


@dataclass
class BaggedTrees:
    trees: list[DecisionTree]
    seeds: list[int]
    kind: str = "bagged_trees"

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        seed: int = 0,
        n_trees: int = 25,
        bootstrap: bool = True,
        max_depth: int = 6,
        min_leaf: int = 3,
    ) -> "BaggedTrees":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = len(y)
        seeds = np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint32).tolist()
        trees = []
        for s in seeds:
            if bootstrap:
                rows = np.sort(np.random.default_rng(s).integers(0, n, n))
            else:
                rows = np.arange(n)
            trees.append(cls._tree(X, y, rows, max_depth, min_leaf))
        return cls(trees, seeds)

    @staticmethod
    def _tree(X, y, rows, max_depth, min_leaf) -> DecisionTree:
        Xb, yb = X[rows], y[rows]
        return DecisionTree(grow_tree(Xb, yb, np.arange(len(yb)), 0, max_depth, min_leaf))

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict_scores(X) for t in self.trees], axis=0)


@dataclass
class ConstantModel:
    """Stand-in when the training data hold a single class."""

    label: int
    kind: str
    degenerate: bool = True

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], float(self.label))


def train(kind: str, m: FeatureMatrix, seed: int = 0, **opts):
    """Fit a model of ``kind`` on ``m``; deterministic given ``seed``."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if len(m) < 1:
        raise ValueError("cannot train on an empty matrix")
    classes = np.unique(m.y)
    if classes.size == 1:
        return ConstantModel(int(classes[0]), kind)
    if kind == "naive_bayes":
        return NaiveBayes.fit(m.X, m.y)
    if kind == "decision_tree":
        return DecisionTree.fit(m.X, m.y, **opts)
    return BaggedTrees.fit(m.X, m.y, seed=seed, **opts)


def predict_score(model, x) -> float:
    """Positive-class probability for one feature vector."""
    values = getattr(x, "values", x)
    return float(model.predict_scores(np.asarray(values, dtype=np.float64)[None, :])[0])


# --------------------------------------------------------------------------- metrics


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the Mann-Whitney rank-sum, ties averaged."""
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    n_pos = int((lab == 1).sum())
    n_neg = int(lab.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = ranks[lab == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f_measure(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Class-frequency-weighted F1 over both classes."""
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.size == 0 or pred.size != lab.size:
        raise ValueError("predictions and labels must be non-empty and equally long")
    total = 0.0
    for c in np.unique(lab):
        tp = float(((pred == c) & (lab == c)).sum())
        fp = float(((pred == c) & (lab != c)).sum())
        fn = float(((pred != c) & (lab == c)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        total += (lab == c).sum() / lab.size * f1
    return float(total)


# --------------------------------------------------------------------------- cross-validation


def stratified_folds(y: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """Assign each row to one of ``k`` test folds, stratified by class.

    Rows of each class are shuffled and dealt round-robin; the deal continues
    across classes so fold sizes stay within one of each other.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        rows = np.flatnonzero(y == c)
        rows = rows[rng.permutation(rows.size)]
        fold_of[rows] = (offset + np.arange(rows.size)) % k
        offset = (offset + rows.size) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


@dataclass
class EvalReport:
    auc: float
    f_measure: float
    fold_scores: list[tuple[float | None, float]]
    n: int
    n_folds: int
    seed: int
    model: str
    task: str = ""
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "auc": self.auc,
            "f": self.f_measure,
            "folds": [{"auc": a, "f": f} for a, f in self.fold_scores],
            "n": self.n,
            "n_folds": self.n_folds,
            "seed": self.seed,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def cross_validate(kind: str, m: FeatureMatrix, seed: int = 0, k: int = 10, task: str = "") -> EvalReport:
    """Stratified k-fold CV; aggregate scores pool all out-of-fold predictions."""
    n = len(m)
    if np.unique(m.y).size < 2:
        raise UndefinedAUCError("cross-validation needs both classes")
    warnings = []
    if n < k:
        warnings.append(f"only {n} rows; using leave-one-out ({n} folds)")
        k = n
    rng = np.random.default_rng(seed)
    fold_seed, model_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))
    folds = stratified_folds(m.y, k, fold_seed)
    model_seeds = np.random.SeedSequence(model_seed).generate_state(k, dtype=np.uint32)
    scores = np.empty(n)
    fold_scores = []
    for f, test in enumerate(folds):
        train_rows = np.setdiff1d(np.arange(n), test)
        model = train(kind, m.subset(train_rows), seed=int(model_seeds[f]))
        s = model.predict_scores(m.X[test])
        scores[test] = s
        yt = m.y[test]
        try:
            fa = auc(s, yt)
        except UndefinedAUCError:
            fa = None
        fold_scores.append((fa, f_measure((s >= 0.5).astype(int), yt)))
    return EvalReport(
        auc=auc(scores, m.y),
        f_measure=f_measure((scores >= 0.5).astype(int), m.y),
        fold_scores=fold_scores,
        n=n,
        n_folds=k,
        seed=seed,
        model=kind,
        task=task,
        warnings=warnings,
    )
