"""Prediction records: data model, file format, and sampling.

A record file is UTF-8 text with one JSON object per line.  Keys are exactly
the :class:`PredictionRecord` field names; optional fields are omitted when
absent.  Probabilities are plain decimal numbers and are written with full
``repr`` precision so that save -> load is the identity.

Example line::

    {"id": "sq-0001", "domain": "squad", "passage_len": 120,
     "prediction_len": 3, "top_probs": [0.6, 0.2, 0.1, 0.06, 0.04],
     "correct": true}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import RecordValidationError

PROB_SUM_TOL = 1e-6

_REQUIRED_KEYS = ("id", "domain", "passage_len", "prediction_len", "top_probs", "correct")
_OPTIONAL_KEYS = ("answerable", "dropout_probs", "dropout_mean_top_probs")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero toward +inf.

    Used for every fractional count in the toolkit (mixture compositions,
    train/validation splits) so the convention is fixed in one place.
    """
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PredictionRecord:
    """One QA example: model outputs plus the exact-match correctness label.

    ``top_probs`` holds the model's five highest softmax probabilities in
    non-increasing order (zero-padded if the n-best list was shorter).  The
    dropout fields are present only for records exported with test-time
    dropout: ``dropout_probs[i]`` is the probability the i-th dropout mask
    assigned to the predicted answer, and ``dropout_mean_top_probs`` holds
    the top five probabilities of the mean ensemble across masks.
    """

    id: str
    domain: str
    passage_len: int
    prediction_len: int
    top_probs: tuple[float, ...]
    correct: bool
    answerable: bool | None = None
    dropout_probs: tuple[float, ...] | None = None
    dropout_mean_top_probs: tuple[float, ...] | None = None

    def validate(self) -> None:
        """Raise :class:`RecordValidationError` naming the violated rule."""
        if not isinstance(self.id, str) or not self.id:
            raise RecordValidationError("record id must be a non-empty string")
        err = lambda rule: RecordValidationError(f"record {self.id!r}: {rule}")
        if not isinstance(self.domain, str) or not self.domain:
            raise err("domain must be a non-empty string")
        for name in ("passage_len", "prediction_len"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise err(f"{name} must be a non-negative integer")
        if not isinstance(self.correct, bool):
            raise err("correct must be a boolean")
        if self.answerable is not None and not isinstance(self.answerable, bool):
            raise err("answerable must be a boolean")
        self._validate_top5("top_probs", self.top_probs)
        if self.dropout_mean_top_probs is not None:
            self._validate_top5("dropout_mean_top_probs", self.dropout_mean_top_probs)
        if self.dropout_probs is not None:
            if len(self.dropout_probs) == 0:
                raise err("dropout_probs must be non-empty when present")
            for p in self.dropout_probs:
                if not _is_prob(p):
                    raise err("dropout_probs entries must lie in [0, 1]")

    def _validate_top5(self, name: str, probs: tuple[float, ...]) -> None:
        err = lambda rule: RecordValidationError(f"record {self.id!r}: {rule}")
        if len(probs) != 5:
            raise err(f"{name} must contain exactly 5 values")
        for p in probs:
            if not _is_prob(p):
                raise err(f"{name} entries must lie in [0, 1]")
        if any(probs[i] < probs[i + 1] for i in range(4)):
            raise err(f"{name} not sorted (must be non-increasing)")
        if sum(probs) > 1.0 + PROB_SUM_TOL:
            raise err(f"{name} sums to more than 1")

    def to_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "domain": self.domain,
            "passage_len": self.passage_len,
            "prediction_len": self.prediction_len,
            "top_probs": list(self.top_probs),
            "correct": self.correct,
        }
        if self.answerable is not None:
            out["answerable"] = self.answerable
        if self.dropout_probs is not None:
            out["dropout_probs"] = list(self.dropout_probs)
        if self.dropout_mean_top_probs is not None:
            out["dropout_mean_top_probs"] = list(self.dropout_mean_top_probs)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PredictionRecord":
        unknown = set(raw) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS)
        if unknown:
            raise RecordValidationError(f"unknown field {sorted(unknown)[0]!r}")
        missing = [k for k in _REQUIRED_KEYS if k not in raw]
        if missing:
            raise RecordValidationError(f"missing field {missing[0]!r}")
        record = cls(
            id=raw["id"],
            domain=raw["domain"],
            passage_len=raw["passage_len"],
            prediction_len=raw["prediction_len"],
            top_probs=_prob_tuple(raw["top_probs"], "top_probs"),
            correct=raw["correct"],
            answerable=raw.get("answerable"),
            dropout_probs=(
                _prob_tuple(raw["dropout_probs"], "dropout_probs")
                if "dropout_probs" in raw
                else None
            ),
            dropout_mean_top_probs=(
                _prob_tuple(raw["dropout_mean_top_probs"], "dropout_mean_top_probs")
                if "dropout_mean_top_probs" in raw
                else None
            ),
        )
        record.validate()
        return record


def _is_prob(p: object) -> bool:
    return isinstance(p, (int, float)) and not isinstance(p, bool) and 0.0 <= p <= 1.0


def _prob_tuple(values: object, name: str) -> tuple[float, ...]:
    if not isinstance(values, list):
        raise RecordValidationError(f"{name} must be a list of numbers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise RecordValidationError(f"{name} must be a list of numbers")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class RecordSet:
    """An ordered, immutable collection of records with unique ids."""

    records: tuple[PredictionRecord, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for r in self.records:
            if r.id in seen:
                raise RecordValidationError(f"duplicate record id {r.id!r}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def ids(self) -> frozenset[str]:
        return frozenset(r.id for r in self.records)

    def domains(self) -> tuple[str, ...]:
        """Distinct domain tags in first-appearance order."""
        out: dict[str, None] = {}
        for r in self.records:
            out.setdefault(r.domain, None)
        return tuple(out)


def load_records(path: str | Path) -> RecordSet:
    """Load and validate a record file; raises on the first bad line."""
    path = Path(path)
    records: list[PredictionRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict):
                raise RecordValidationError(f"{path}:{lineno}: line is not an object")
            try:
                record = PredictionRecord.from_dict(raw)
            except RecordValidationError as exc:
                raise RecordValidationError(f"{path}:{lineno}: {exc}") from exc
            if record.id in seen:
                raise RecordValidationError(f"{path}:{lineno}: duplicate record id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    if not records:
        raise RecordValidationError(f"{path}: empty record set")
    return RecordSet(records=tuple(records), provenance=str(path))


def save_records(record_set: RecordSet, path: str | Path) -> None:
    """Write a record file that :func:`load_records` reproduces exactly."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in record_set.records:
            fh.write(json.dumps(record.to_dict()) + "\n")


def sample_mixture(
    source: RecordSet,
    ood: RecordSet,
    alpha: float,
    n: int,
    seed: int,
) -> RecordSet:
    """Sample a test mixture: round(alpha*n) source records, the rest OOD.

    Sampling is without replacement within each pool and the output order is
    a seeded shuffle, so the result is a pure function of (inputs, seed).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n <= 0:
        raise ValueError("n must be positive")
    n_source = round_half_up(alpha * n)
    n_ood = n - n_source
    if len(source) < n_source:
        raise RecordValidationError(
            f"source pool has {len(source)} records, need {n_source}"
        )
    if len(ood) < n_ood:
        raise RecordValidationError(f"ood pool has {len(ood)} records, need {n_ood}")
    rng = np.random.default_rng(seed)
    picked = [source.records[i] for i in rng.choice(len(source), size=n_source, replace=False)]
    picked += [ood.records[i] for i in rng.choice(len(ood), size=n_ood, replace=False)]
    order = rng.permutation(n)
    return RecordSet(
        records=tuple(picked[i] for i in order),
        provenance=f"mixture(alpha={alpha}, n={n}, seed={seed})",
    )


def split(record_set: RecordSet, fraction: float, seed: int) -> tuple[RecordSet, RecordSet]:
    """Seeded partition into round(fraction*n) records and the remainder."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if len(record_set) == 0:
        raise RecordValidationError("cannot split an empty record set")
    n = len(record_set)
    k = round_half_up(fraction * n)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    first = tuple(record_set.records[i] for i in order[:k])
    second = tuple(record_set.records[i] for i in order[k:])
    tag = f"split(fraction={fraction}, seed={seed}) of {record_set.provenance}"
    return (
        RecordSet(records=first, provenance=tag + " [first]"),
        RecordSet(records=second, provenance=tag + " [second]"),
    )


def subset(record_set: RecordSet, size: int, seed: int, provenance: str = "") -> RecordSet:
    """Seeded sample of ``size`` records without replacement."""
    if size > len(record_set):
        raise RecordValidationError(
            f"pool has {len(record_set)} records, need {size}"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(record_set), size=size, replace=False)
    return RecordSet(
        records=tuple(record_set.records[i] for i in idx),
        provenance=provenance or f"subset(size={size}, seed={seed}) of {record_set.provenance}",
    )


def concat(sets: Iterable[RecordSet], provenance: str = "") -> RecordSet:
    """Concatenate record sets, preserving order; ids must stay unique."""
    records: list[PredictionRecord] = []
    for s in sets:
        records.extend(s.records)
    return RecordSet(records=tuple(records), provenance=provenance)
