"""Calibrator feature extraction.

Canonical feature catalogs (order is part of the contract):

* base variant (7 features):
  ``passage_len, prediction_len, top_prob_1 .. top_prob_5``
* dropout variant (8 features):
  ``passage_len, prediction_len, dropout_top_prob_1 .. dropout_top_prob_5,
  dropout_neg_var``

The dropout variant replaces the raw softmax probabilities with the mean
ensemble over dropout masks and appends the negative variance of the
predicted answer's probability across masks.

Ablation masks address feature *groups*:

==================  ==========================================
group               features removed
==================  ==========================================
``top1``            the highest (ensemble) probability
``top2_5``          the 2nd..5th (ensemble) probabilities
``all_softmax``     all five (ensemble) probabilities
``passage_len``     passage length
``prediction_len``  predicted answer length
``dropout_var``     the variance feature (dropout variant only)
==================  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import FeatureMaskError, MissingFieldError
from .records import PredictionRecord

BASE_CATALOG: tuple[str, ...] = (
    "passage_len",
    "prediction_len",
    "top_prob_1",
    "top_prob_2",
    "top_prob_3",
    "top_prob_4",
    "top_prob_5",
)

DROPOUT_CATALOG: tuple[str, ...] = (
    "passage_len",
    "prediction_len",
    "dropout_top_prob_1",
    "dropout_top_prob_2",
    "dropout_top_prob_3",
    "dropout_top_prob_4",
    "dropout_top_prob_5",
    "dropout_neg_var",
)

_BASE_GROUPS: dict[str, tuple[str, ...]] = {
    "top1": ("top_prob_1",),
    "top2_5": ("top_prob_2", "top_prob_3", "top_prob_4", "top_prob_5"),
    "all_softmax": ("top_prob_1", "top_prob_2", "top_prob_3", "top_prob_4", "top_prob_5"),
    "passage_len": ("passage_len",),
    "prediction_len": ("prediction_len",),
}

_DROPOUT_GROUPS: dict[str, tuple[str, ...]] = {
    "top1": ("dropout_top_prob_1",),
    "top2_5": (
        "dropout_top_prob_2",
        "dropout_top_prob_3",
        "dropout_top_prob_4",
        "dropout_top_prob_5",
    ),
    "all_softmax": (
        "dropout_top_prob_1",
        "dropout_top_prob_2",
        "dropout_top_prob_3",
        "dropout_top_prob_4",
        "dropout_top_prob_5",
    ),
    "passage_len": ("passage_len",),
    "prediction_len": ("prediction_len",),
    "dropout_var": ("dropout_neg_var",),
}

MASK_GROUPS: tuple[str, ...] = ("top1", "top2_5", "all_softmax", "passage_len", "prediction_len", "dropout_var")


@dataclass(frozen=True)
class FeatureMask:
    """Set of feature groups excluded from extraction."""

    excluded: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        unknown = self.excluded - set(MASK_GROUPS)
        if unknown:
            raise FeatureMaskError(f"unknown feature group {sorted(unknown)[0]!r}")

    @classmethod
    def of(cls, *groups: str) -> "FeatureMask":
        return cls(excluded=frozenset(groups))

    def label(self) -> str:
        """Stable human-readable name, used as a report row key."""
        if not self.excluded:
            return "full"
        return "-" + ",".join(sorted(self.excluded))


EMPTY_MASK = FeatureMask()


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    names: tuple[str, ...]
    mask: FeatureMask

    def __post_init__(self) -> None:
        if len(self.values) != len(self.names):
            raise FeatureMaskError("feature values and names must be parallel")


def masked_catalog(variant: str, mask: FeatureMask) -> tuple[str, ...]:
    """Feature names that survive ``mask`` for the given variant."""
    if variant == "base":
        catalog, groups = BASE_CATALOG, _BASE_GROUPS
    elif variant == "dropout":
        catalog, groups = DROPOUT_CATALOG, _DROPOUT_GROUPS
    else:
        raise FeatureMaskError(f"unknown variant {variant!r}")
    unknown = mask.excluded - set(groups)
    if unknown:
        raise FeatureMaskError(
            f"feature group {sorted(unknown)[0]!r} does not exist in the {variant} variant"
        )
    removed = {name for group in mask.excluded for name in groups[group]}
    names = tuple(name for name in catalog if name not in removed)
    if not names:
        raise FeatureMaskError("mask removes every feature")
    return names


def negative_variance(values: tuple[float, ...]) -> float:
    """Negative population variance; exactly 0.0 for a constant sequence."""
    n = len(values)
    first = values[0]
    if all(v == first for v in values):
        return 0.0
    mean = sum(values) / n
    return -(sum((v - mean) ** 2 for v in values) / n)


def extract_base_features(record: PredictionRecord, mask: FeatureMask = EMPTY_MASK) -> FeatureVector:
    """Extract the 7 base-variant features (lengths + raw top-5 probs)."""
    names = masked_catalog("base", mask)
    full = {
        "passage_len": float(record.passage_len),
        "prediction_len": float(record.prediction_len),
        "top_prob_1": record.top_probs[0],
        "top_prob_2": record.top_probs[1],
        "top_prob_3": record.top_probs[2],
        "top_prob_4": record.top_probs[3],
        "top_prob_5": record.top_probs[4],
    }
    return FeatureVector(values=tuple(full[n] for n in names), names=names, mask=mask)


def extract_dropout_features(record: PredictionRecord, mask: FeatureMask = EMPTY_MASK) -> FeatureVector:
    """Extract the 8 dropout-variant features (mean-ensemble probs + neg var)."""
    if record.dropout_probs is None or record.dropout_mean_top_probs is None:
        raise MissingFieldError(f"record {record.id!r} lacks dropout fields")
    names = masked_catalog("dropout", mask)
    mean_probs = record.dropout_mean_top_probs
    full = {
        "passage_len": float(record.passage_len),
        "prediction_len": float(record.prediction_len),
        "dropout_top_prob_1": mean_probs[0],
        "dropout_top_prob_2": mean_probs[1],
        "dropout_top_prob_3": mean_probs[2],
        "dropout_top_prob_4": mean_probs[3],
        "dropout_top_prob_5": mean_probs[4],
        "dropout_neg_var": negative_variance(record.dropout_probs),
    }
    return FeatureVector(values=tuple(full[n] for n in names), names=names, mask=mask)


def extract(record: PredictionRecord, variant: str, mask: FeatureMask = EMPTY_MASK) -> FeatureVector:
    if variant == "base":
        return extract_base_features(record, mask)
    if variant == "dropout":
        return extract_dropout_features(record, mask)
    raise FeatureMaskError(f"unknown variant {variant!r}")
