"""Classifier specs, trained-model wrappers and the one-vs-all ensemble.

Training canonicalizes the row order (lexicographic over feature values then
label) before any sampling, so permuting the input rows never changes a
fitted model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from landfuse.learners.ensembles import (
    GradientBoostedTrees,
    RandomForest,
    TrainingError,
)

FAMILIES = ("random-forest", "gradient-boosted-trees")

# Documented engine defaults; everything is overridable per spec/grid.
FOREST_DEFAULTS = {
    "n_estimators": 100,
    "max_attributes": "sqrt",
    "max_depth": None,
    "min_samples_leaf": 1,
    "bootstrap": True,
}
BOOSTING_DEFAULTS = {
    "n_estimators": 100,
    "learning_rate": 0.1,
    "max_depth": 6,
    "min_samples_leaf": 1,
    "l2_leaf": 1.0,
}


def reference_grid(family: str) -> dict[str, list]:
    """The hyperparameter grids used for cross-validated tuning."""
    if family == "random-forest":
        return {
            "n_estimators": [50, 100, 150, 500, 1000],
            "max_attributes": ["sqrt", "log2", 0.2],
            "max_depth": [None, 2, 5, 10, 20, 50],
        }
    if family == "gradient-boosted-trees":
        return {
            "n_estimators": [50, 100, 400, 700, 1000],
            "learning_rate": [0.5, 0.2, 0.1, 0.05, 0.02],
        }
    raise TrainingError(f"unknown learner family {family!r}")


@dataclass
class LearnerSpec:
    """A learner family with fixed hyperparameters plus a candidate grid."""

    family: str
    hyperparams: dict = field(default_factory=dict)
    grid: dict[str, list] = field(default_factory=dict)
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise TrainingError(f"unknown learner family {self.family!r}")
        for key, candidates in self.grid.items():
            if not candidates:
                raise TrainingError(f"grid entry {key!r} is empty")
        if self.cv_folds < 2:
            raise TrainingError("cv_folds must be >= 2")

    def with_hyperparams(self, **overrides) -> "LearnerSpec":
        merged = dict(self.hyperparams)
        merged.update(overrides)
        return replace(self, hyperparams=merged)

    def resolved_hyperparams(self) -> dict:
        defaults = (FOREST_DEFAULTS if self.family == "random-forest"
                    else BOOSTING_DEFAULTS)
        merged = dict(defaults)
        unknown = set(self.hyperparams) - set(defaults)
        if unknown:
            raise TrainingError(
                f"unknown hyperparameters for {self.family}: {sorted(unknown)}")
        merged.update(self.hyperparams)
        return merged


def _canonical_order(X: np.ndarray, codes: np.ndarray) -> np.ndarray:
    keys = (codes,) + tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


@dataclass
class TrainedModel:
    """A fitted probabilistic classifier bound to its feature columns."""

    family: str
    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    hyperparams: dict
    impl: RandomForest | GradientBoostedTrees

    def _check_columns(self, X: np.ndarray, feature_names=None) -> None:
        if feature_names is not None and tuple(feature_names) != self.feature_names:
            raise TrainingError("feature columns do not match the fitted model")
        if X.shape[1] != len(self.feature_names):
            raise TrainingError(
                f"expected {len(self.feature_names)} feature columns, "
                f"got {X.shape[1]}")

    def predict_proba(self, X: np.ndarray, feature_names=None) -> np.ndarray:
        """Class probability vectors (rows sum to 1), columns in class order."""
        X = np.asarray(X, dtype=float)
        self._check_columns(X, feature_names)
        return self.impl.predict_proba(X)

    def predict(self, X: np.ndarray, feature_names=None) -> np.ndarray:
        probs = self.predict_proba(X, feature_names)
        return np.array([self.classes[i] for i in np.argmax(probs, axis=1)],
                        dtype=object)


def train(spec: LearnerSpec, X: np.ndarray, feature_names, labels) -> TrainedModel:
    """Fit one classifier. Deterministic under the spec's seed, invariant to
    the order of the training rows."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=object)
    if X.ndim != 2 or len(X) != len(labels):
        raise TrainingError("rows and labels misaligned")
    if len(X) == 0:
        raise TrainingError("empty training set")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise TrainingError(f"training data contains a single class {classes!r}")
    index = {c: i for i, c in enumerate(classes)}
    codes = np.array([index[v] for v in labels], dtype=np.int64)
    order = _canonical_order(X, codes)
    X = np.ascontiguousarray(X[order])
    codes = codes[order]

    params = spec.resolved_hyperparams()
    if spec.family == "random-forest":
        impl = RandomForest(seed=spec.seed, **params)
    else:
        impl = GradientBoostedTrees(seed=spec.seed, **params)
    impl.fit(X, codes, len(classes))
    return TrainedModel(
        family=spec.family,
        classes=classes,
        feature_names=tuple(feature_names),
        hyperparams=params,
        impl=impl,
    )


REST = "__rest__"


@dataclass
class OneVsAllModel:
    """One binary model per hypothesis; exposes the raw per-hypothesis
    probabilities, which are deliberately not normalized across hypotheses."""

    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    models: dict[str, TrainedModel]

    def prob_per_class(self, X: np.ndarray, feature_names=None) -> np.ndarray:
        """Column h holds P_h from hypothesis h's binary model, in [0, 1]."""
        out = np.empty((len(X), len(self.classes)))
        for k, cls in enumerate(self.classes):
            model = self.models[cls]
            probs = model.predict_proba(X, feature_names)
            out[:, k] = probs[:, model.classes.index(cls)]
        return out


def train_one_vs_all(spec: LearnerSpec, X: np.ndarray, feature_names,
                     labels, classes) -> OneVsAllModel:
    """One binary model per singleton hypothesis, trained on labels mapped to
    {hypothesis, rest}."""
    labels = np.asarray(labels, dtype=object)
    models: dict[str, TrainedModel] = {}
    for cls in classes:
        binary = np.where(labels == cls, cls, REST)
        models[cls] = train(spec, X, feature_names, binary)
    return OneVsAllModel(
        classes=tuple(classes),
        feature_names=tuple(feature_names),
        models=models,
    )
