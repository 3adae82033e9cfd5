"""Exhaustive grid search scored by stratified k-fold macro-mean F1."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from landfuse.evaluation import metrics_from_predictions
from landfuse.learners.ensembles import TrainingError
from landfuse.learners.model import LearnerSpec, train
from landfuse.rng import substream


def stratified_fold_ids(labels: np.ndarray, k: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Fold assignment dealing each class round-robin after a seeded shuffle.

    Every fold sees every class, which requires each class to have at least k
    rows.
    """
    labels = np.asarray(labels, dtype=object)
    fold = np.empty(len(labels), dtype=np.int64)
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise TrainingError(
                f"class {cls!r} has {len(idx)} rows, fewer than {k} folds")
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = np.arange(len(idx)) % k
    return fold


@dataclass(frozen=True)
class CandidateScore:
    hyperparams: dict
    fold_scores: tuple[float, ...]
    mean_score: float


@dataclass(frozen=True)
class GridSearchResult:
    best: LearnerSpec
    scores: tuple[CandidateScore, ...]


def grid_search(spec: LearnerSpec, X: np.ndarray, feature_names,
                labels) -> GridSearchResult:
    """Evaluate every grid candidate with the same stratified folds; ties on
    mean macro-F1 go to the earlier candidate in grid order."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=object)
    classes = sorted(set(labels.tolist()))
    keys = list(spec.grid.keys())
    if keys:
        candidates = [dict(zip(keys, combo))
                      for combo in product(*(spec.grid[k] for k in keys))]
    else:
        candidates = [{}]
    fold = stratified_fold_ids(labels, spec.cv_folds,
                               substream(spec.seed, "grid-search"))
    scores: list[CandidateScore] = []
    best_idx = 0
    best_mean = -np.inf
    for ci, cand in enumerate(candidates):
        cand_spec = spec.with_hyperparams(**cand)
        fold_scores = []
        for f in range(spec.cv_folds):
            held = fold == f
            model = train(cand_spec, X[~held], feature_names, labels[~held])
            predicted = model.predict(X[held])
            bundle = metrics_from_predictions(labels[held].tolist(),
                                              predicted.tolist(), classes)
            fold_scores.append(bundle.mf1)
        mean_score = float(np.mean(fold_scores))
        scores.append(CandidateScore(cand, tuple(fold_scores), mean_score))
        if mean_score > best_mean:
            best_mean = mean_score
            best_idx = ci
    return GridSearchResult(
        best=spec.with_hyperparams(**candidates[best_idx]),
        scores=tuple(scores),
    )
