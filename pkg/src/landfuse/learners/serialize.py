"""Model persistence: a versioned JSON text format that round-trips exactly.

Floats are written with Python's shortest round-trip repr, so a
save/load/save cycle is byte-identical and reloaded models predict
bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from landfuse.learners.ensembles import GradientBoostedTrees, RandomForest
from landfuse.learners.model import TrainedModel
from landfuse.learners.trees import Tree

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable or incompatible model file."""


def _tree_payload(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from(payload: dict) -> Tree:
    return Tree(
        feature=np.array(payload["feature"], dtype=np.int32),
        threshold=np.array(payload["threshold"], dtype=np.float64),
        left=np.array(payload["left"], dtype=np.int32),
        right=np.array(payload["right"], dtype=np.int32),
        value=np.array(payload["value"], dtype=np.float64),
    )


def model_to_dict(model: TrainedModel) -> dict:
    impl = model.impl
    if isinstance(impl, RandomForest):
        payload = {
            "n_classes": impl.n_classes,
            "trees": [_tree_payload(t) for t in impl.trees],
        }
    elif isinstance(impl, GradientBoostedTrees):
        payload = {
            "n_classes": impl.n_classes,
            "learning_rate": impl.learning_rate,
            "stages": [[_tree_payload(t) for t in stage] for stage in impl.trees],
        }
    else:
        raise ModelFormatError(f"cannot serialize {type(impl).__name__}")
    return {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "classes": list(model.classes),
        "feature_names": list(model.feature_names),
        "hyperparams": model.hyperparams,
        "impl": payload,
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {doc.get('format_version')!r}")
    family = doc["family"]
    params = doc["hyperparams"]
    if family == "random-forest":
        impl = RandomForest(**params)
        impl.n_classes = doc["impl"]["n_classes"]
        impl.trees = [_tree_from(t) for t in doc["impl"]["trees"]]
    elif family == "gradient-boosted-trees":
        impl = GradientBoostedTrees(**params)
        impl.n_classes = doc["impl"]["n_classes"]
        impl.learning_rate = doc["impl"]["learning_rate"]
        impl.trees = [[_tree_from(t) for t in stage]
                      for stage in doc["impl"]["stages"]]
    else:
        raise ModelFormatError(f"unknown family {family!r}")
    return TrainedModel(
        family=family,
        classes=tuple(doc["classes"]),
        feature_names=tuple(doc["feature_names"]),
        hyperparams=params,
        impl=impl,
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=None, separators=(",", ":"),
                   sort_keys=True) + "\n",
        encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"unparseable model file {path}: {exc}") from exc
    return model_from_dict(doc)
