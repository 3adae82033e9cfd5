"""Training-set balancing: synthetic minority oversampling for mixed
numeric/categorical rows, random undersampling, and a no-op.

Balancing is applied to the training partition only; the test set stays
unbalanced.  Everything is deterministic under the plan's seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from landfuse.rng import substream


class ResamplingError(ValueError):
    """Unusable balancing input."""


@dataclass
class BalancingPlan:
    """strategy is one of none | random-undersample | smote-nc.

    target overrides the per-class row counts (default: majority count for
    oversampling, minority count for undersampling).  k_neighbors only
    matters for smote-nc.
    """

    strategy: str = "none"
    target: dict[str, int] | None = None
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in ("none", "random-undersample", "smote-nc"):
            raise ResamplingError(f"unknown balancing strategy {self.strategy!r}")
        if self.target is not None and any(v < 0 for v in self.target.values()):
            raise ResamplingError("target counts must be nonnegative")
        if self.k_neighbors < 1:
            raise ResamplingError("k_neighbors must be >= 1")


def _class_order(labels: np.ndarray) -> list[str]:
    return sorted(set(labels.tolist()))


def smote_nc(rows: np.ndarray, categorical: np.ndarray, labels: np.ndarray,
             plan: BalancingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Upsample every minority class to the target count (majority count by
    default) with interpolated synthetic rows.

    A synthetic row interpolates numeric columns between a base minority row
    and one of its k nearest minority neighbors (u ~ Uniform(0,1)); its
    categorical columns take the majority value among the base row's k
    nearest neighbors.  Nearest neighbors use Euclidean distance on the
    numeric columns, each categorical mismatch contributing the squared
    median of the class's numeric standard deviations.  Original rows are
    always preserved.
    """
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels, dtype=object)
    categorical = np.asarray(categorical, dtype=bool)
    if rows.shape[0] != len(labels):
        raise ResamplingError("rows and labels misaligned")
    if rows.shape[1] != len(categorical):
        raise ResamplingError("categorical mask misaligned with columns")
    rng = substream(plan.seed, "smote-nc")
    order = _class_order(labels)
    counts = {c: int(np.sum(labels == c)) for c in order}
    majority = max(counts.values())
    num_cols = ~categorical

    new_rows: list[np.ndarray] = []
    new_labels: list[str] = []
    for cls in order:
        target = majority if plan.target is None else plan.target.get(cls, majority)
        n_cls = counts[cls]
        needed = target - n_cls
        if needed <= 0:
            continue
        members = np.where(labels == cls)[0]
        base_rows = rows[members]
        if n_cls == 1:
            warnings.warn(
                f"class {cls!r} has a single training row; duplicating it",
                stacklevel=2)
            new_rows.extend([base_rows[0].copy() for _ in range(needed)])
            new_labels.extend([cls] * needed)
            continue
        k = plan.k_neighbors
        if k >= n_cls:
            k = n_cls - 1
            warnings.warn(
                f"class {cls!r}: k_neighbors shrunk to {k} (class has "
                f"{n_cls} rows)", stacklevel=2)
        # mismatch penalty: median of the numeric columns' population stds
        if num_cols.any():
            med = float(np.median(np.std(base_rows[:, num_cols], axis=0)))
        else:
            med = 0.0
        med2 = med * med

        # all-pairs distances within the class (desk scale: exact search)
        numeric = base_rows[:, num_cols]
        d2 = np.sum((numeric[:, None, :] - numeric[None, :, :]) ** 2, axis=2)
        if categorical.any():
            cat = base_rows[:, categorical]
            mismatches = np.sum(cat[:, None, :] != cat[None, :, :], axis=2)
            d2 = d2 + med2 * mismatches
        np.fill_diagonal(d2, np.inf)
        knn = np.argsort(d2, axis=1, kind="stable")[:, :k]

        # categorical value per base row: majority among its k neighbors,
        # ties toward the smallest code
        cat_value = np.empty((n_cls, int(categorical.sum())))
        cat_block = base_rows[:, categorical]
        for i in range(n_cls):
            neigh_vals = cat_block[knn[i]]
            for j in range(neigh_vals.shape[1]):
                vals, freq = np.unique(neigh_vals[:, j], return_counts=True)
                cat_value[i, j] = vals[np.argmax(freq)]

        bases = np.resize(rng.permutation(n_cls), needed)
        pick = rng.integers(0, k, size=needed)
        u = rng.uniform(0.0, 1.0, size=needed)
        for b, p, uu in zip(bases, pick, u):
            neighbor = knn[b, p]
            synth = base_rows[b].copy()
            synth[num_cols] = (base_rows[b, num_cols]
                               + uu * (base_rows[neighbor, num_cols]
                                       - base_rows[b, num_cols]))
            synth[categorical] = cat_value[b]
            new_rows.append(synth)
            new_labels.append(cls)

    if not new_rows:
        return rows.copy(), labels.copy()
    out_rows = np.vstack([rows, np.array(new_rows)])
    out_labels = np.concatenate([labels, np.array(new_labels, dtype=object)])
    return out_rows, out_labels


def random_undersample(rows: np.ndarray, labels: np.ndarray,
                       plan: BalancingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Downsample every class, without replacement, to the minority count
    (or the plan's per-class target).  Surviving rows keep their order."""
    rows = np.asarray(rows, dtype=float)
    labels = np.asarray(labels, dtype=object)
    rng = substream(plan.seed, "random-undersample")
    order = _class_order(labels)
    counts = {c: int(np.sum(labels == c)) for c in order}
    minority = min(counts.values())
    keep: list[int] = []
    for cls in order:
        target = minority if plan.target is None else plan.target.get(cls, minority)
        members = np.where(labels == cls)[0]
        if len(members) <= target:
            keep.extend(members.tolist())
        else:
            chosen = rng.choice(members, size=target, replace=False)
            keep.extend(sorted(chosen.tolist()))
    keep.sort()
    return rows[keep], labels[keep]


def apply_balancing(rows: np.ndarray, categorical: np.ndarray,
                    labels: np.ndarray, plan: BalancingPlan,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch on the plan's strategy."""
    if plan.strategy == "none":
        return np.asarray(rows, dtype=float).copy(), \
            np.asarray(labels, dtype=object).copy()
    if plan.strategy == "random-undersample":
        return random_undersample(rows, labels, plan)
    return smote_nc(rows, categorical, labels, plan)
