"""Risk-coverage analysis on a handful of records, step by step.

A selective QA system answers only when its confidence clears a threshold.
Sweeping that threshold trades coverage (how often we answer) against risk
(how often an answer is wrong).  This demo builds four records by hand and
walks the whole curve.
"""

from selectiveqa import (
    PredictionRecord,
    RecordSet,
    ScoredRecord,
    auc,
    best_possible_curve,
    coverage_at_accuracy,
    risk_coverage_curve,
)


def record(rid, top1, correct):
    # top_probs always has five entries, padded and non-increasing
    rest = [round((1 - top1) * w, 6) for w in (0.4, 0.3, 0.2, 0.1)]
    return PredictionRecord(
        id=rid,
        domain="squad",
        passage_len=100,
        prediction_len=2,
        top_probs=(top1, *rest),
        correct=correct,
    )


records = RecordSet(
    records=(
        record("q1", 0.9, True),
        record("q2", 0.8, True),
        record("q3", 0.7, False),  # confidently wrong
        record("q4", 0.6, True),
    )
)

# MaxProb: confidence = the model's highest softmax probability
scored = [ScoredRecord(r, r.top_probs[0]) for r in records]

curve = risk_coverage_curve(scored)
print("coverage  risk    threshold")
for p in curve.points:
    print(f"{p.coverage:7.2f} {p.risk:7.3f} {p.threshold:10.2f}")

print(f"\nAUC (mean prefix risk): {auc(curve):.4f}")
for level in (0.8, 0.9):
    print(f"coverage at {level:.0%} accuracy: {coverage_at_accuracy(scored, level):.2f}")

# The best possible selective predictor answers every correct example
# before any incorrect one.  No confidence function can beat it.
oracle = best_possible_curve(records)
print(f"\nbest possible AUC with this base model: {auc(oracle):.4f}")
print("risk at full coverage always equals the base error rate:",
      f"{oracle.points[-1].risk:.2f}")
