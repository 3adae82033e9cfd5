"""Probabilistic classifiers for both fusion routes: bagged forests,
boosted trees, a one-vs-all wrapper and cross-validated grid search."""

from landfuse.learners.ensembles import (
    GradientBoostedTrees,
    RandomForest,
    TrainingError,
    resolve_max_attributes,
)
from landfuse.learners.model import (
    BOOSTING_DEFAULTS,
    FOREST_DEFAULTS,
    LearnerSpec,
    OneVsAllModel,
    TrainedModel,
    reference_grid,
    train,
    train_one_vs_all,
)
from landfuse.learners.search import (
    CandidateScore,
    GridSearchResult,
    grid_search,
    stratified_fold_ids,
)
from landfuse.learners.serialize import (
    ModelFormatError,
    load_model,
    save_model,
)
from landfuse.learners.trees import Tree, bin_columns, grow_tree, grow_tree_hist

__all__ = [
    "BOOSTING_DEFAULTS",
    "FOREST_DEFAULTS",
    "CandidateScore",
    "GradientBoostedTrees",
    "GridSearchResult",
    "LearnerSpec",
    "ModelFormatError",
    "OneVsAllModel",
    "RandomForest",
    "TrainedModel",
    "Tree",
    "TrainingError",
    "grid_search",
    "grow_tree",
    "load_model",
    "reference_grid",
    "resolve_max_attributes",
    "save_model",
    "stratified_fold_ids",
    "train",
    "train_one_vs_all",
]
