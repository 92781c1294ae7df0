"""Risk-coverage analysis and calibration diagnostics.

Records are ranked by confidence descending (ties broken by record id
ascending, which makes every curve deterministic).  The curve has one point
per prefix k = 1..n with coverage k/n and risk = wrong-in-prefix / k.  AUC is
the arithmetic mean of the n prefix risks, i.e. a right-Riemann integral of
risk over the uniform coverage grid.

Accuracy thresholds (``coverage_at_accuracy``) compare the prefix accuracy
``correct_k / k`` to the requested level in ordinary float arithmetic.

All core values stay in [0, 1]; percent-style scaling happens only in the
CLI layer.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .confidence import ScoredRecord
from .errors import MissingFieldError, ToolkitError
from .records import RecordSet


@dataclass(frozen=True)
class RiskCoveragePoint:
    coverage: float
    risk: float
    threshold: float


@dataclass(frozen=True)
class RiskCoverageCurve:
    points: tuple[RiskCoveragePoint, ...]
    total: int

    def risks(self) -> np.ndarray:
        return np.asarray([p.risk for p in self.points])

    def coverages(self) -> np.ndarray:
        return np.asarray([p.coverage for p in self.points])


@dataclass(frozen=True)
class SelectiveMetrics:
    auc: float
    cov_at_acc: dict[float, float]


@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    count: int
    mean_confidence: float  # NaN when the bin is empty
    accuracy: float  # NaN when the bin is empty


@dataclass(frozen=True)
class DomainSlice:
    share: float
    accuracy: float  # NaN when no answered example comes from the domain
    count: int


@dataclass(frozen=True)
class UnanswerableThreshold:
    gamma_prime: float
    em_score: float


def _ranked(scored: Sequence[ScoredRecord]) -> list[ScoredRecord]:
    if len(scored) == 0:
        raise ToolkitError("metrics are undefined on an empty scored set")
    return sorted(scored, key=lambda s: (-s.confidence, s.record.id))


def risk_coverage_curve(scored: Sequence[ScoredRecord]) -> RiskCoverageCurve:
    """One point per confidence-ranked prefix; last point has coverage 1."""
    ranked = _ranked(scored)
    n = len(ranked)
    wrong = np.cumsum([0 if s.record.correct else 1 for s in ranked])
    ks = np.arange(1, n + 1, dtype=np.float64)
    risks = wrong / ks
    points = tuple(
        RiskCoveragePoint(
            coverage=float(k / n), risk=float(r), threshold=ranked[int(k) - 1].confidence
        )
        for k, r in zip(ks, risks)
    )
    return RiskCoverageCurve(points=points, total=n)


def auc(curve: RiskCoverageCurve) -> float:
    """Mean of the prefix risks; 0 for all-correct, 1 for all-wrong."""
    return float(np.mean(curve.risks()))


def coverage_at_accuracy(scored: Sequence[ScoredRecord], acc_level: float) -> float:
    """Largest coverage whose answered prefix keeps accuracy >= acc_level."""
    if not 0.0 < acc_level <= 1.0:
        raise ValueError("acc_level must lie in (0, 1]")
    k_star, n = _best_prefix(scored, acc_level)
    return k_star / n


def _best_prefix(scored: Sequence[ScoredRecord], acc_level: float) -> tuple[int, int]:
    ranked = _ranked(scored)
    n = len(ranked)
    correct = np.cumsum([1 if s.record.correct else 0 for s in ranked])
    ks = np.arange(1, n + 1, dtype=np.float64)
    qualifying = np.nonzero(correct / ks >= acc_level)[0]
    if qualifying.size == 0:
        return 0, n
    return int(qualifying[-1]) + 1, n


def selective_metrics(
    scored: Sequence[ScoredRecord], acc_levels: Sequence[float] = (0.8, 0.9)
) -> SelectiveMetrics:
    return SelectiveMetrics(
        auc=auc(risk_coverage_curve(scored)),
        cov_at_acc={lvl: coverage_at_accuracy(scored, lvl) for lvl in acc_levels},
    )


def best_possible_curve(record_set: RecordSet) -> RiskCoverageCurve:
    """Oracle curve: every correct record answered before any incorrect one.

    This is the pointwise-minimal achievable risk at every coverage for the
    fixed base model.
    """
    if len(record_set) == 0:
        raise ToolkitError("metrics are undefined on an empty record set")
    scored = [ScoredRecord(r, 1.0 if r.correct else 0.0) for r in record_set]
    return risk_coverage_curve(scored)


def reliability_diagram(
    scored: Sequence[ScoredRecord], n_bins: int = 10
) -> list[ReliabilityBin]:
    """Equal-width confidence bins with per-bin count, mean conf, accuracy.

    Bins are [lo, hi) except the last, which includes 1.0.  Empty bins are
    emitted with count 0 and NaN statistics.  Confidences must lie in [0, 1],
    so negative-variance scores are rejected.
    """
    if len(scored) == 0:
        raise ToolkitError("metrics are undefined on an empty scored set")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    conf = np.asarray([s.confidence for s in scored])
    if conf.min() < 0.0 or conf.max() > 1.0:
        bad = [s for s in scored if not 0.0 <= s.confidence <= 1.0][0]
        raise ToolkitError(
            f"record {bad.record.id!r}: confidence {bad.confidence} outside [0, 1]; "
            "reliability diagrams need probability-scale confidences"
        )
    correct = np.asarray([1.0 if s.record.correct else 0.0 for s in scored])
    edges = np.arange(n_bins + 1) / n_bins
    idx = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        members = idx == b
        count = int(members.sum())
        if count == 0:
            bins.append(ReliabilityBin(float(edges[b]), float(edges[b + 1]), 0, math.nan, math.nan))
        else:
            bins.append(
                ReliabilityBin(
                    lo=float(edges[b]),
                    hi=float(edges[b + 1]),
                    count=count,
                    mean_confidence=float(conf[members].mean()),
                    accuracy=float(correct[members].mean()),
                )
            )
    return bins


def per_domain_breakdown(
    scored: Sequence[ScoredRecord], acc_level: float
) -> dict[str, DomainSlice]:
    """Domain composition of the answered prefix at coverage_at_accuracy.

    Shares sum to 1 over the answered prefix.  Domains absent from the prefix
    get share 0 and NaN accuracy.  Returns {} when no prefix reaches the
    accuracy level.
    """
    domains = sorted({s.record.domain for s in scored})
    if len(domains) < 2:
        raise ToolkitError("per-domain breakdown needs at least 2 distinct domains")
    k_star, _ = _best_prefix(scored, acc_level)
    if k_star == 0:
        return {}
    prefix = _ranked(scored)[:k_star]
    out: dict[str, DomainSlice] = {}
    for domain in domains:
        members = [s for s in prefix if s.record.domain == domain]
        count = len(members)
        out[domain] = DomainSlice(
            share=count / k_star,
            accuracy=(sum(s.record.correct for s in members) / count) if count else math.nan,
            count=count,
        )
    return out


def tune_unanswerable_threshold(scored: Sequence[ScoredRecord]) -> UnanswerableThreshold:
    """Pick gamma' maximizing mean EM when `confidence < gamma'` means
    "predict unanswerable".

    EM convention: an unanswerable question scores 1 iff predicted
    unanswerable; an answerable question scores its correct flag when
    answered and 0 when abstained.  Candidates are the midpoints between
    consecutive distinct sorted confidences plus -inf and +inf; ties take the
    lowest candidate.
    """
    if len(scored) == 0:
        raise ToolkitError("metrics are undefined on an empty scored set")
    for s in scored:
        if s.record.answerable is None:
            raise MissingFieldError(f"record {s.record.id!r} lacks the answerable flag")
    by_conf = sorted(scored, key=lambda s: (s.confidence, s.record.id))
    n = len(by_conf)
    # prefix[i]: score contribution if the i lowest-confidence records abstain
    unanswerable = [0.0 if s.record.answerable else 1.0 for s in by_conf]
    answered_score = [
        1.0 if (s.record.answerable and s.record.correct) else 0.0 for s in by_conf
    ]
    abstain_prefix = np.concatenate([[0.0], np.cumsum(unanswerable)])
    answer_suffix = np.concatenate([np.cumsum(answered_score[::-1])[::-1], [0.0]])
    confidences = [s.confidence for s in by_conf]
    candidates: list[tuple[float, int]] = [(-math.inf, 0)]
    for i in range(n - 1):
        if confidences[i] < confidences[i + 1]:
            candidates.append(((confidences[i] + confidences[i + 1]) / 2.0, i + 1))
    candidates.append((math.inf, n))
    best_gamma, best_em = -math.inf, -1.0
    for gamma, k in candidates:
        em = (abstain_prefix[k] + answer_suffix[k]) / n
        if em > best_em:
            best_gamma, best_em = gamma, em
    return UnanswerableThreshold(gamma_prime=best_gamma, em_score=float(best_em))


def curve_to_csv(curve: RiskCoverageCurve, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coverage", "risk", "threshold"])
        for p in curve.points:
            writer.writerow([repr(p.coverage), repr(p.risk), repr(p.threshold)])


def bins_to_csv(bins: Sequence[ReliabilityBin], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count", "mean_conf", "accuracy"])
        for b in bins:
            writer.writerow(
                [
                    repr(b.lo),
                    repr(b.hi),
                    b.count,
                    "" if math.isnan(b.mean_confidence) else repr(b.mean_confidence),
                    "" if math.isnan(b.accuracy) else repr(b.accuracy),
                ]
            )
