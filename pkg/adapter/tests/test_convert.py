import json
import random
import subprocess
import sys

import pytest

from mrqa_adapter import AdapterError, convert
from mrqa_adapter.cli import main as cli_main

WORDS = (
    "the walls of ancient Carthage were rebuilt by merchants trading salt "
    "olive oil and purple dye across narrow seas while scribes counted "
    "amphorae in long dusty storehouses near harbor gates"
).split()


def write_gold(path, examples):
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": {"dataset": "fixture"}}) + "\n")
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "context": ex["context"],
                        "qas": [
                            {
                                "qid": ex["qid"],
                                "question": ex["question"],
                                "answers": ex["answers"],
                            }
                        ],
                    }
                )
                + "\n"
            )


def write_nbest(path, entries):
    path.write_text(json.dumps(entries), encoding="utf-8")


def make_fixture(tmp_path, n=50, n_dropout=3, seed=7):
    """Gold + n-best + dropout n-best files with varied correctness."""
    rng = random.Random(seed)
    examples = []
    nbest = {}
    dropout = [dict() for _ in range(n_dropout)]
    for i in range(n):
        qid = f"q{i:04d}"
        context = " ".join(rng.choice(WORDS) for _ in range(rng.randint(20, 120)))
        answer = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4)))
        aliases = [answer, answer.upper() + "."]
        examples.append(
            {
                "qid": qid,
                "context": context,
                "question": "what was counted?",
                "answers": aliases,
            }
        )
        correct = rng.random() < 0.6
        predicted = answer if correct else "granite obelisks"
        top = round(rng.uniform(0.35, 0.9), 6)
        decoys = ["clay tablets", "bronze mirrors", "cedar beams"]
        remaining = 1.0 - top
        cands = [{"text": predicted, "probability": top}]
        weights = [0.5, 0.3, 0.2]
        for decoy, w in zip(decoys[: rng.randint(1, 3)], weights):
            cands.append({"text": decoy, "probability": round(remaining * w, 6)})
        nbest[qid] = cands
        for m in range(n_dropout):
            mask_top = min(1.0, max(0.0, top + rng.uniform(-0.15, 0.1)))
            mask_cands = [{"text": predicted, "probability": round(mask_top, 6)}]
            if rng.random() < 0.25:
                # this mask's n-best misses the predicted string entirely
                mask_cands = [
                    {"text": "granite obelisks" if predicted != "granite obelisks" else "clay tablets",
                     "probability": round(mask_top, 6)}
                ]
            mask_cands.sort(key=lambda c: -c["probability"])
            dropout[m][qid] = mask_cands

    gold_path = tmp_path / "gold.jsonl"
    nbest_path = tmp_path / "nbest.json"
    write_gold(gold_path, examples)
    write_nbest(nbest_path, nbest)
    dropout_paths = []
    for m, entries in enumerate(dropout):
        p = tmp_path / f"dropout_{m}.json"
        write_nbest(p, entries)
        dropout_paths.append(p)
    return gold_path, nbest_path, dropout_paths


class TestConvertBasics:
    def test_single_example_fields(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        nbest = tmp_path / "nbest.json"
        write_gold(
            gold,
            [
                {
                    "qid": "q1",
                    "context": "Paris is the capital of France",
                    "question": "capital?",
                    "answers": ["Paris"],
                }
            ],
        )
        write_nbest(
            nbest,
            {
                "q1": [
                    {"text": "Paris", "probability": 0.7},
                    {"text": "paris.", "probability": 0.2},
                ]
            },
        )
        out = tmp_path / "records.jsonl"
        assert convert(gold, nbest, "squad", out) == 1
        record = json.loads(out.read_text().strip())
        assert record["top_probs"] == [0.7, 0.2, 0.0, 0.0, 0.0]
        assert record["correct"] is True
        assert record["passage_len"] == 6
        assert record["prediction_len"] == 1
        assert "dropout_probs" not in record and "answerable" not in record

    def test_dropout_string_aggregation(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(
            gold,
            [
                {
                    "qid": "q1",
                    "context": "Paris is the capital",
                    "question": "capital?",
                    "answers": ["Paris"],
                }
            ],
        )
        nbest = tmp_path / "nbest.json"
        write_nbest(
            nbest,
            {"q1": [{"text": "Paris", "probability": 0.7}]},
        )
        d1 = tmp_path / "d1.json"
        write_nbest(
            d1,
            {"q1": [{"text": "Paris", "probability": 0.5}, {"text": "Lyon", "probability": 0.3}]},
        )
        d2 = tmp_path / "d2.json"
        # two surface forms of the predicted answer combine to 0.8
        write_nbest(
            d2,
            {
                "q1": [
                    {"text": "paris.", "probability": 0.4},
                    {"text": "The Paris", "probability": 0.4},
                ]
            },
        )
        out = tmp_path / "records.jsonl"
        convert(gold, nbest, "squad", out, dropout_nbest_paths=[d1, d2])
        record = json.loads(out.read_text().strip())
        assert record["dropout_probs"] == [0.5, 0.8]
        assert record["dropout_mean_top_probs"] == [0.65, 0.15, 0.0, 0.0, 0.0]

    def test_missing_string_in_mask_scores_zero(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(
            gold,
            [{"qid": "q1", "context": "x y", "question": "?", "answers": ["x"]}],
        )
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q1": [{"text": "x", "probability": 0.9}]})
        d1 = tmp_path / "d1.json"
        write_nbest(d1, {"q1": [{"text": "y", "probability": 0.9}]})
        out = tmp_path / "records.jsonl"
        convert(gold, nbest, "d", out, dropout_nbest_paths=[d1])
        record = json.loads(out.read_text().strip())
        assert record["dropout_probs"] == [0.0]

    def test_qid_mismatch_rejected(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(gold, [{"qid": "q1", "context": "x", "question": "?", "answers": ["x"]}])
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q2": [{"text": "x", "probability": 0.5}]})
        with pytest.raises(AdapterError, match="q2"):
            convert(gold, nbest, "d", tmp_path / "out.jsonl")

    def test_dropout_qid_set_must_match(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(gold, [{"qid": "q1", "context": "x", "question": "?", "answers": ["x"]}])
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q1": [{"text": "x", "probability": 0.5}]})
        d1 = tmp_path / "d1.json"
        write_nbest(d1, {"other": [{"text": "x", "probability": 0.5}]})
        with pytest.raises(AdapterError, match="qid set differs"):
            convert(gold, nbest, "d", tmp_path / "out.jsonl", dropout_nbest_paths=[d1])

    def test_unranked_candidates_rejected(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(gold, [{"qid": "q1", "context": "x", "question": "?", "answers": ["x"]}])
        nbest = tmp_path / "nbest.json"
        write_nbest(
            nbest,
            {"q1": [{"text": "x", "probability": 0.2}, {"text": "y", "probability": 0.5}]},
        )
        with pytest.raises(AdapterError, match="not ranked"):
            convert(gold, nbest, "d", tmp_path / "out.jsonl")

    def test_probability_epsilon_clipped_with_warning(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(gold, [{"qid": "q1", "context": "x", "question": "?", "answers": ["x"]}])
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q1": [{"text": "x", "probability": 1.0000000001}]})
        out = tmp_path / "out.jsonl"
        with pytest.warns(UserWarning, match="clipped"):
            convert(gold, nbest, "d", out)
        assert json.loads(out.read_text())["top_probs"][0] == 1.0

    def test_probability_above_tolerance_rejected(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(gold, [{"qid": "q1", "context": "x", "question": "?", "answers": ["x"]}])
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q1": [{"text": "x", "probability": 1.01}]})
        with pytest.raises(AdapterError, match="exceeds 1"):
            convert(gold, nbest, "d", tmp_path / "out.jsonl")

    def test_strict_single_answer_mode(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(
            gold,
            [{"qid": "q1", "context": "x", "question": "?", "answers": ["first", "second"]}],
        )
        nbest = tmp_path / "nbest.json"
        write_nbest(nbest, {"q1": [{"text": "second", "probability": 0.9}]})
        out = tmp_path / "out.jsonl"
        convert(gold, nbest, "d", out)
        assert json.loads(out.read_text())["correct"] is True
        convert(gold, nbest, "d", out, strict_single_answer=True)
        assert json.loads(out.read_text())["correct"] is False

    def test_squad2_unanswerable(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(
            gold,
            [
                {"qid": "q1", "context": "x y z", "question": "?", "answers": []},
                {"qid": "q2", "context": "x y z", "question": "?", "answers": ["x"]},
            ],
        )
        nbest = tmp_path / "nbest.json"
        write_nbest(
            nbest,
            {
                "q1": [{"text": "x", "probability": 0.8}],
                "q2": [{"text": "x", "probability": 0.8}],
            },
        )
        out = tmp_path / "out.jsonl"
        with pytest.raises(AdapterError, match="no gold answers"):
            convert(gold, nbest, "d", out)
        convert(gold, nbest, "d", out, squad2=True)
        records = {json.loads(line)["id"]: json.loads(line) for line in out.read_text().splitlines()}
        assert records["q1"]["answerable"] is False and records["q1"]["correct"] is False
        assert records["q2"]["answerable"] is True and records["q2"]["correct"] is True

    def test_qid_allowlist(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        write_gold(
            gold,
            [
                {"qid": "q1", "context": "x", "question": "?", "answers": ["x"]},
                {"qid": "q2", "context": "x", "question": "?", "answers": ["x"]},
            ],
        )
        nbest = tmp_path / "nbest.json"
        write_nbest(
            nbest,
            {
                "q1": [{"text": "x", "probability": 0.8}],
                "q2": [{"text": "x", "probability": 0.8}],
            },
        )
        out = tmp_path / "out.jsonl"
        convert(gold, nbest, "d", out, qid_allowlist={"q2"})
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 and json.loads(lines[0])["id"] == "q2"


class TestFixtureCorpus:
    """Criterion-style checks on the 50-example fixture."""

    def test_output_passes_primary_validator(self, tmp_path):
        gold, nbest, dropout_paths = make_fixture(tmp_path)
        out = tmp_path / "records.jsonl"
        assert convert(gold, nbest, "fixture", out, dropout_nbest_paths=dropout_paths) == 50
        proc = subprocess.run(
            [sys.executable, "-m", "selectiveqa.cli", "validate", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "OK (50 records)" in proc.stdout

    def test_round_trips_through_primary_save_load(self, tmp_path):
        gold, nbest, dropout_paths = make_fixture(tmp_path)
        out = tmp_path / "records.jsonl"
        convert(gold, nbest, "fixture", out, dropout_nbest_paths=dropout_paths)

        # the record file format is the external contract; the primary's
        # load/save pair is its reference implementation
        from selectiveqa.records import load_records, save_records

        loaded = load_records(out)
        resaved = tmp_path / "resaved.jsonl"
        save_records(loaded, resaved)
        assert load_records(resaved).records == loaded.records
        assert all(len(r.dropout_probs) == 3 for r in loaded)

    def test_thirty_dropout_masks(self, tmp_path):
        gold, nbest, dropout_paths = make_fixture(tmp_path, n=5, n_dropout=30, seed=11)
        out = tmp_path / "records.jsonl"
        convert(gold, nbest, "fixture", out, dropout_nbest_paths=dropout_paths)
        for line in out.read_text().splitlines():
            assert len(json.loads(line)["dropout_probs"]) == 30

    def test_cli_end_to_end(self, tmp_path, capsys):
        gold, nbest, dropout_paths = make_fixture(tmp_path, n=10)
        out = tmp_path / "records.jsonl"
        code = cli_main(
            [
                str(gold),
                str(nbest),
                "--domain",
                "fixture",
                "--out",
                str(out),
                "--dropout-nbest",
                *[str(p) for p in dropout_paths],
            ]
        )
        assert code == 0
        assert "wrote 10 records" in capsys.readouterr().out

    def test_cli_reports_errors(self, tmp_path, capsys):
        gold, nbest, _ = make_fixture(tmp_path, n=3)
        assert cli_main([str(gold), str(tmp_path / "missing.json"), "--domain", "d", "--out", str(tmp_path / "o")]) == 2
