"""Tree ensembles: bagged forests and second-order boosted trees.

Fixed engine choices (kept deliberately independent of any external
library's heuristics): forests use Gini impurity, bootstrap resampling and
per-split feature subsampling; class probabilities average the leaf class
distributions over trees.  Boosting minimizes the multinomial (or binomial)
log-loss with one Newton step per tree, depth-6 trees, no row subsampling
and an L2 leaf penalty.
"""

from __future__ import annotations

import math

import numpy as np

from landfuse.learners.trees import Tree, bin_columns, grow_tree, grow_tree_hist


class TrainingError(ValueError):
    """Unusable training input."""


def resolve_max_attributes(rule, n_features: int) -> int | None:
    """Number of candidate features per split.

    'sqrt' / 'log2' are the usual rules, a float is a fraction of the
    columns, an int is taken literally, None (or 'all') uses every column.
    """
    if rule is None or rule == "all":
        return None
    if rule == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if rule == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if isinstance(rule, float):
        if not 0.0 < rule <= 1.0:
            raise TrainingError(f"max_attributes fraction {rule!r} out of (0, 1]")
        return max(1, int(rule * n_features))
    if isinstance(rule, int) and rule >= 1:
        return min(rule, n_features)
    raise TrainingError(f"bad max_attributes rule {rule!r}")


class RandomForest:
    """Bootstrap-aggregated classification trees.

    predict_proba averages the leaf class distributions of the trees; with
    unbounded depth every leaf is pure and this coincides with the fraction
    of tree votes.
    """

    def __init__(self, n_estimators: int = 100, max_depth: int | None = None,
                 max_attributes="sqrt", min_samples_leaf: int = 1,
                 bootstrap: bool = True, seed: int = 0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_attributes = max_attributes
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees: list[Tree] = []
        self.n_classes = 0

    def fit(self, X: np.ndarray, y_codes: np.ndarray, n_classes: int) -> "RandomForest":
        n = len(X)
        self.n_classes = n_classes
        self.trees = []
        k = resolve_max_attributes(self.max_attributes, X.shape[1])
        children = np.random.SeedSequence(self.seed).spawn(self.n_estimators)
        for t in range(self.n_estimators):
            rng = np.random.default_rng(children[t])
            if self.bootstrap:
                rows = rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            self.trees.append(grow_tree(
                X[rows],
                y_codes[rows],
                n_classes,
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                max_features=k,
                rng=rng,
            ))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def _softmax(raw: np.ndarray) -> np.ndarray:
    z = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoostedTrees:
    """Additive regression trees on the multiclass log-loss.

    Each iteration takes one Newton step per class (a single sigmoid tree in
    the binary case); leaf weights carry an L2 penalty.  train_loss_ records
    the training log-loss after every iteration.
    """

    def __init__(self, n_estimators: int = 100, learning_rate: float = 0.1,
                 max_depth: int | None = 6, min_samples_leaf: int = 1,
                 l2_leaf: float = 1.0, seed: int = 0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.l2_leaf = l2_leaf
        self.seed = seed  # unused (no stochastic subsampling); kept for symmetry
        self.trees: list[list[Tree]] = []
        self.n_classes = 0
        self.train_loss_: list[float] = []

    def fit(self, X: np.ndarray, y_codes: np.ndarray, n_classes: int
            ) -> "GradientBoostedTrees":
        n = len(X)
        self.n_classes = n_classes
        self.trees = []
        self.train_loss_ = []
        binary = n_classes == 2
        onehot = np.equal(y_codes[:, None], np.arange(n_classes)[None, :]
                          ).astype(float)
        binned = bin_columns(X)
        raw = np.zeros((n, 1 if binary else n_classes))
        for _ in range(self.n_estimators):
            stage: list[Tree] = []
            if binary:
                p = 1.0 / (1.0 + np.exp(-raw[:, 0]))
                tree = grow_tree_hist(
                    binned,
                    p - onehot[:, 1],
                    p * (1.0 - p),
                    l2=self.l2_leaf,
                    max_depth=self.max_depth,
                    min_samples_leaf=self.min_samples_leaf,
                )
                raw[:, 0] += self.learning_rate * tree.predict(X)[:, 0]
                stage.append(tree)
            else:
                probs = _softmax(raw)
                for c in range(n_classes):
                    tree = grow_tree_hist(
                        binned,
                        probs[:, c] - onehot[:, c],
                        probs[:, c] * (1.0 - probs[:, c]),
                        l2=self.l2_leaf,
                        max_depth=self.max_depth,
                        min_samples_leaf=self.min_samples_leaf,
                    )
                    raw[:, c] += self.learning_rate * tree.predict(X)[:, 0]
                    stage.append(tree)
            self.trees.append(stage)
            self.train_loss_.append(self._loss(raw, onehot))
        return self

    def _loss(self, raw: np.ndarray, onehot: np.ndarray) -> float:
        probs = self._proba_from_raw(raw)
        p_true = np.clip((probs * onehot).sum(axis=1), 1e-15, 1.0)
        return float(-np.mean(np.log(p_true)))

    def _proba_from_raw(self, raw: np.ndarray) -> np.ndarray:
        if self.n_classes == 2:
            p = 1.0 / (1.0 + np.exp(-raw[:, 0]))
            return np.column_stack([1.0 - p, p])
        return _softmax(raw)

    def _raw(self, X: np.ndarray) -> np.ndarray:
        width = 1 if self.n_classes == 2 else self.n_classes
        raw = np.zeros((len(X), width))
        for stage in self.trees:
            for c, tree in enumerate(stage):
                raw[:, c] += self.learning_rate * tree.predict(X)[:, 0]
        return raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self._proba_from_raw(self._raw(X))
