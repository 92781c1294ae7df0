"""Confidence estimators for selective prediction.

Five ways to attach a scalar confidence to a prediction record:

* ``max_prob``: the model's highest softmax probability.
* ``dropout_mean``: mean probability of the prediction across dropout masks.
* ``dropout_neg_var``: negative (population) variance across dropout masks.
* ``calibrator``: probability-of-correct from a trained random forest.
* ``outlier``: probability-of-in-domain from a forest trained as an outlier
  detector on the same base features.

Confidences are never rescaled or clamped; the selective-prediction metrics
downstream depend only on their relative order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingFieldError, ToolkitError
from .features import EMPTY_MASK, FeatureMask, extract, masked_catalog, negative_variance
from .forest import RandomForest, predict_proba, predict_proba_matrix
from .records import PredictionRecord, RecordSet

METHOD_KINDS = ("max_prob", "dropout_mean", "dropout_neg_var", "calibrator", "outlier")


@dataclass(frozen=True)
class ConfidenceMethod:
    """A confidence estimator, optionally carrying a trained model."""

    kind: str
    model: RandomForest | None = None
    variant: str = "base"
    mask: FeatureMask = EMPTY_MASK

    def __post_init__(self) -> None:
        if self.kind not in METHOD_KINDS:
            raise ToolkitError(f"unknown confidence method {self.kind!r}")
        if self.kind in ("calibrator", "outlier"):
            if self.model is None:
                raise ToolkitError(f"{self.kind} method requires a trained forest")
            expected = masked_catalog(
                self.variant if self.kind == "calibrator" else "base", self.mask
            )
            if self.model.feature_names != expected:
                raise ToolkitError(
                    f"{self.kind} model was trained on {list(self.model.feature_names)}, "
                    f"expected {list(expected)}"
                )

    @classmethod
    def maxprob(cls) -> "ConfidenceMethod":
        return cls(kind="max_prob")

    @classmethod
    def dropout_mean(cls) -> "ConfidenceMethod":
        return cls(kind="dropout_mean")

    @classmethod
    def dropout_neg_var(cls) -> "ConfidenceMethod":
        return cls(kind="dropout_neg_var")

    @classmethod
    def calibrator(
        cls, model: RandomForest, variant: str = "base", mask: FeatureMask = EMPTY_MASK
    ) -> "ConfidenceMethod":
        return cls(kind="calibrator", model=model, variant=variant, mask=mask)

    @classmethod
    def outlier(cls, model: RandomForest, mask: FeatureMask = EMPTY_MASK) -> "ConfidenceMethod":
        return cls(kind="outlier", model=model, mask=mask)


@dataclass(frozen=True)
class ScoredRecord:
    record: PredictionRecord
    confidence: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.confidence):
            raise ToolkitError(f"record {self.record.id!r}: confidence is not finite")


def max_prob(record: PredictionRecord) -> float:
    return record.top_probs[0]


def dropout_mean(record: PredictionRecord) -> float:
    if record.dropout_probs is None:
        raise MissingFieldError(f"record {record.id!r} lacks dropout_probs")
    return sum(record.dropout_probs) / len(record.dropout_probs)


def dropout_neg_var(record: PredictionRecord) -> float:
    """Negative population variance of the per-mask probabilities; <= 0."""
    if record.dropout_probs is None:
        raise MissingFieldError(f"record {record.id!r} lacks dropout_probs")
    if len(record.dropout_probs) < 2:
        raise MissingFieldError(
            f"record {record.id!r}: dropout variance needs at least 2 masks"
        )
    return negative_variance(record.dropout_probs)


def calibrator_confidence(
    model: RandomForest,
    record: PredictionRecord,
    variant: str = "base",
    mask: FeatureMask = EMPTY_MASK,
) -> float:
    """Calibrator confidence: the forest's predicted probability of correct."""
    return predict_proba(model, extract(record, variant, mask))


def outlier_confidence(model: RandomForest, record: PredictionRecord) -> float:
    """Outlier-detector confidence: predicted probability of in-domain."""
    return predict_proba(model, extract(record, "base", EMPTY_MASK))


def score_all(record_set: RecordSet, method: ConfidenceMethod) -> list[ScoredRecord]:
    """Score every record, preserving order; fails naming the first bad id."""
    if len(record_set) == 0:
        raise ToolkitError("cannot score an empty record set")
    if method.kind == "max_prob":
        return [ScoredRecord(r, max_prob(r)) for r in record_set]
    if method.kind == "dropout_mean":
        return [ScoredRecord(r, dropout_mean(r)) for r in record_set]
    if method.kind == "dropout_neg_var":
        return [ScoredRecord(r, dropout_neg_var(r)) for r in record_set]
    # Forest-backed methods score as one batch for speed.
    assert method.model is not None
    variant = method.variant if method.kind == "calibrator" else "base"
    matrix = np.asarray(
        [extract(r, variant, method.mask).values for r in record_set], dtype=np.float64
    )
    confidences = predict_proba_matrix(method.model, matrix)
    return [ScoredRecord(r, float(c)) for r, c in zip(record_set, confidences)]
