import numpy as np
import pytest

from selectiveqa.records import PredictionRecord, RecordSet


def make_record(
    id="r1",
    domain="squad",
    passage_len=120,
    prediction_len=3,
    top_probs=(0.6, 0.2, 0.1, 0.06, 0.04),
    correct=True,
    **kw,
):
    return PredictionRecord(
        id=id,
        domain=domain,
        passage_len=passage_len,
        prediction_len=prediction_len,
        top_probs=tuple(top_probs),
        correct=correct,
        **kw,
    )


def random_record_set(rng: np.random.Generator, n: int, domains=("squad", "newsqa"), prefix="r"):
    """Arbitrary valid records with random correctness and probabilities."""
    records = []
    for i in range(n):
        top1 = float(rng.uniform(0.2, 1.0))
        rest = sorted(rng.uniform(0, (1 - top1) / 4, size=4), reverse=True)
        records.append(
            make_record(
                id=f"{prefix}{i:04d}",
                domain=str(rng.choice(domains)),
                passage_len=int(rng.integers(10, 400)),
                prediction_len=int(rng.integers(1, 8)),
                top_probs=(top1, *[float(v) for v in rest]),
                correct=bool(rng.random() < 0.6),
            )
        )
    return RecordSet(records=tuple(records), provenance="test")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
