"""Classification scoring: confusion matrices, per-class metrics, source
contribution analyses (single-source runs, leave-one-source-out) and the
correct-source histogram.

The retraining analyses are expressed against a small context protocol so
this module stays independent of the orchestration code that provides it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Protocol, Sequence

import numpy as np


class EvaluationError(ValueError):
    """Empty or inconsistent evaluation input."""


def percent(value: float) -> int:
    """Fraction -> whole percent, rounded half-up (report table style)."""
    return int(Decimal(value * 100).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = polygons of ground-truth class i predicted as class j."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.classes)
        if counts.shape != (c, c):
            raise EvaluationError(f"confusion matrix must be {c}x{c}")
        if np.any(counts < 0):
            raise EvaluationError("negative confusion counts")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @staticmethod
    def from_predictions(truth: Sequence[str], predicted: Sequence[str],
                         classes: Sequence[str]) -> "ConfusionMatrix":
        if len(truth) != len(predicted):
            raise EvaluationError("truth and predictions differ in length")
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(truth, predicted):
            counts[index[t], index[p]] += 1
        return ConfusionMatrix(tuple(classes), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricsBundle:
    """Per-class recall/precision/F1 plus overall accuracy and macro-mean F1.

    zero_denominator lists the classes where a recall or precision had an
    empty denominator and was defined as 0.
    """

    classes: tuple[str, ...]
    recall: np.ndarray
    precision: np.ndarray
    f1: np.ndarray
    oa: float
    mf1: float
    zero_denominator: tuple[str, ...] = field(default=())

    def per_class(self, name: str) -> tuple[float, float, float]:
        i = self.classes.index(name)
        return float(self.recall[i]), float(self.precision[i]), float(self.f1[i])


def metrics(cm: ConfusionMatrix) -> MetricsBundle:
    """Recall, precision and F1 per class; overall accuracy; macro-mean F1.

    Zero denominators (a class absent from truth, or never predicted) yield 0
    and are flagged rather than raising.
    """
    if cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    counts = cm.counts.astype(float)
    diag = np.diag(counts)
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    flagged: list[str] = []
    recall = np.zeros(len(cm.classes))
    precision = np.zeros(len(cm.classes))
    f1 = np.zeros(len(cm.classes))
    for i, name in enumerate(cm.classes):
        bad = False
        if row[i] > 0:
            recall[i] = diag[i] / row[i]
        else:
            bad = True
        if col[i] > 0:
            precision[i] = diag[i] / col[i]
        else:
            bad = True
        if recall[i] + precision[i] > 0:
            f1[i] = 2.0 * recall[i] * precision[i] / (recall[i] + precision[i])
        else:
            bad = True
        if bad:
            flagged.append(name)
    return MetricsBundle(
        classes=cm.classes,
        recall=recall,
        precision=precision,
        f1=f1,
        oa=float(diag.sum() / counts.sum()),
        mf1=float(f1.mean()),
        zero_denominator=tuple(flagged),
    )


def metrics_from_predictions(truth: Sequence[str], predicted: Sequence[str],
                             classes: Sequence[str]) -> MetricsBundle:
    return metrics(ConfusionMatrix.from_predictions(truth, predicted, classes))


# ---------------------------------------------------------------------------
# source-contribution analyses

class FusionContext(Protocol):
    """What the retraining analyses need from the orchestration layer."""

    @property
    def sources(self) -> tuple[str, ...]: ...

    def full_metrics(self) -> MetricsBundle: ...

    def evaluate_with_sources(self, sources: Sequence[str]) -> MetricsBundle: ...


def single_source_ablation(ctx: FusionContext, source: str) -> MetricsBundle:
    """Full train/evaluate cycle restricted to one source's columns (its
    neighbor columns included)."""
    if source not in ctx.sources:
        raise EvaluationError(f"unknown source {source!r}")
    return ctx.evaluate_with_sources([source])


@dataclass(frozen=True)
class LocoDelta:
    """Score lost when one source is dropped: full-model metric minus
    dropped-source metric.  Negative deltas mean the model improved without
    the source."""

    source: str
    oa_delta: float
    mf1_delta: float
    f1_delta: dict[str, float]
    full: MetricsBundle
    dropped: MetricsBundle


def loco_by_source(ctx: FusionContext, source: str) -> LocoDelta:
    """Leave-one-source-out: retrain without the source, report signed score
    deltas (full minus dropped)."""
    if source not in ctx.sources:
        raise EvaluationError(f"unknown source {source!r}")
    remaining = [s for s in ctx.sources if s != source]
    if not remaining:
        raise EvaluationError("cannot drop the only source")
    full = ctx.full_metrics()
    dropped = ctx.evaluate_with_sources(remaining)
    return LocoDelta(
        source=source,
        oa_delta=full.oa - dropped.oa,
        mf1_delta=full.mf1 - dropped.mf1,
        f1_delta={c: float(full.f1[i] - dropped.f1[i])
                  for i, c in enumerate(full.classes)},
        full=full,
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# correct-source histogram

@dataclass(frozen=True)
class CorrectSourceHistogram:
    """For each fused method and correctness split, the frequency of polygons
    with exactly k correct per-source predictions (k = 0..n_sources).

    Each (method, correct?) row is normalized to sum 1; empty rows stay 0.
    """

    sources: tuple[str, ...]
    methods: tuple[str, ...]
    rows: dict[tuple[str, bool], np.ndarray]

    def row(self, method: str, correct: bool) -> np.ndarray:
        return self.rows[(method, correct)]


def correct_source_histogram(
    per_source_predictions: dict[str, Sequence[str]],
    fused_predictions: dict[str, Sequence[str]],
    truth: Sequence[str],
) -> CorrectSourceHistogram:
    """Distribution of the number of per-source correct predictions, split by
    whether each fused method got the polygon right."""
    sources = tuple(per_source_predictions.keys())
    n = len(truth)
    if n == 0:
        raise EvaluationError("no polygons to evaluate")
    for s, preds in per_source_predictions.items():
        if len(preds) != n:
            raise EvaluationError(f"source {s!r} predictions misaligned")
    truth_arr = np.asarray(truth, dtype=object)
    n_correct = np.zeros(n, dtype=int)
    for preds in per_source_predictions.values():
        n_correct += np.asarray(preds, dtype=object) == truth_arr

    rows: dict[tuple[str, bool], np.ndarray] = {}
    for method, preds in fused_predictions.items():
        if len(preds) != n:
            raise EvaluationError(f"method {method!r} predictions misaligned")
        ok = np.asarray(preds, dtype=object) == truth_arr
        for flag in (True, False):
            mask = ok == flag
            hist = np.bincount(n_correct[mask], minlength=len(sources) + 1).astype(float)
            total = hist.sum()
            rows[(method, flag)] = hist / total if total > 0 else hist
    return CorrectSourceHistogram(
        sources=sources,
        methods=tuple(fused_predictions.keys()),
        rows=rows,
    )
