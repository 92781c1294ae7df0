"""Convert MRQA gold files + n-best prediction files into prediction records.

Inputs:

* gold file: MRQA format, one JSON object per line with ``context`` and
  ``qas`` (each qa: ``qid``, ``question``, ``answers``).  A leading
  ``{"header": ...}`` line is skipped.  In SQuAD-2.0 mode an empty answer
  list is allowed and marks the question unanswerable.
* n-best file: JSON object mapping qid -> ranked candidate list, each
  candidate ``{"text": ..., "probability": ...}`` with non-increasing
  probabilities (the standard n-best export format).
* optionally one n-best file per dropout mask, sharing the main file's qids.

Output: the selectiveqa record format, one JSON object per line.  Lengths
are whitespace token counts.  Correctness is SQuAD exact match of the
rank-1 answer.  The dropout ensemble is aggregated over *normalized answer
strings*: per mask, the probability of the predicted string (0.0 when the
mask's n-best lacks it); the mean-ensemble top five come from averaging each
string's probability across masks.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .normalize import exact_match, normalize_answer

PROB_TOL = 1e-6


class AdapterError(Exception):
    """Malformed input artifact or mismatched files."""


@dataclass(frozen=True)
class GoldExample:
    qid: str
    passage: str
    question: str
    answers: tuple[str, ...]
    answerable: bool


@dataclass(frozen=True)
class NBestEntry:
    qid: str
    candidates: tuple[tuple[str, float], ...]  # (text, probability), ranked


def load_gold(path: str | Path, squad2: bool = False) -> dict[str, GoldExample]:
    path = Path(path)
    out: dict[str, GoldExample] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "header" in raw:
                continue
            context = raw.get("context")
            qas = raw.get("qas")
            if not isinstance(context, str) or not isinstance(qas, list):
                raise AdapterError(f"{path}:{lineno}: expected 'context' and 'qas'")
            for qa in qas:
                qid = qa.get("qid")
                if not isinstance(qid, str) or not qid:
                    raise AdapterError(f"{path}:{lineno}: qa without a qid")
                if qid in out:
                    raise AdapterError(f"{path}:{lineno}: duplicate qid {qid!r}")
                answers = qa.get("answers", [])
                if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
                    raise AdapterError(f"{path}:{lineno}: qid {qid!r} has malformed answers")
                if not answers and not squad2:
                    raise AdapterError(
                        f"{path}:{lineno}: qid {qid!r} has no gold answers "
                        "(use SQuAD-2.0 mode for unanswerable questions)"
                    )
                out[qid] = GoldExample(
                    qid=qid,
                    passage=context,
                    question=qa.get("question", ""),
                    answers=tuple(answers),
                    answerable=bool(answers),
                )
    if not out:
        raise AdapterError(f"{path}: no gold examples found")
    return out


def _clean_probability(p: object, where: str) -> float:
    if isinstance(p, bool) or not isinstance(p, (int, float)):
        raise AdapterError(f"{where}: probability is not a number")
    p = float(p)
    if p < 0.0:
        raise AdapterError(f"{where}: negative probability {p}")
    if p > 1.0 + PROB_TOL:
        raise AdapterError(f"{where}: probability {p} exceeds 1")
    if p > 1.0:
        warnings.warn(f"{where}: probability {p} clipped to 1.0", stacklevel=3)
        p = 1.0
    return p


def load_nbest(path: str | Path) -> dict[str, NBestEntry]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AdapterError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise AdapterError(f"{path}: expected an object mapping qid to candidates")
    out: dict[str, NBestEntry] = {}
    for qid, candidates in raw.items():
        if not isinstance(candidates, list) or not candidates:
            raise AdapterError(f"{path}: qid {qid!r} has no candidates")
        cleaned: list[tuple[str, float]] = []
        total = 0.0
        for i, cand in enumerate(candidates):
            if not isinstance(cand, dict) or "text" not in cand or "probability" not in cand:
                raise AdapterError(f"{path}: qid {qid!r} candidate {i} lacks text/probability")
            prob = _clean_probability(cand["probability"], f"{path}: qid {qid!r} candidate {i}")
            if cleaned and prob > cleaned[-1][1]:
                raise AdapterError(f"{path}: qid {qid!r} candidates not ranked by probability")
            cleaned.append((str(cand["text"]), prob))
            total += prob
        if total > 1.0 + PROB_TOL:
            raise AdapterError(f"{path}: qid {qid!r} candidate probabilities sum to {total}")
        out[qid] = NBestEntry(qid=qid, candidates=tuple(cleaned))
    return out


def _token_count(text: str) -> int:
    return len(text.split())


def _top5(probs: list[float]) -> list[float]:
    padded = list(probs[:5]) + [0.0] * (5 - min(5, len(probs)))
    return padded


def _string_distribution(entry: NBestEntry) -> dict[str, float]:
    dist: dict[str, float] = {}
    for text, prob in entry.candidates:
        key = normalize_answer(text)
        dist[key] = dist.get(key, 0.0) + prob
    return dist


def convert(
    gold_path: str | Path,
    nbest_path: str | Path,
    domain: str,
    out_path: str | Path,
    dropout_nbest_paths: list[str | Path] | None = None,
    strict_single_answer: bool = False,
    squad2: bool = False,
    qid_allowlist: set[str] | None = None,
) -> int:
    """Write one record per predicted qid; returns the number written."""
    gold = load_gold(gold_path, squad2=squad2)
    nbest = load_nbest(nbest_path)
    missing = sorted(set(nbest) - set(gold))
    if missing:
        raise AdapterError(f"qid {missing[0]!r} in {nbest_path} is missing from the gold file")

    dropout_maps: list[dict[str, NBestEntry]] = []
    for dpath in dropout_nbest_paths or []:
        dmap = load_nbest(dpath)
        if set(dmap) != set(nbest):
            raise AdapterError(f"{dpath}: dropout n-best qid set differs from {nbest_path}")
        dropout_maps.append(dmap)

    qids = [q for q in nbest if qid_allowlist is None or q in qid_allowlist]
    if not qids:
        raise AdapterError("no qids left to convert")

    out_path = Path(out_path)
    written = 0
    with out_path.open("w", encoding="utf-8") as fh:
        for qid in qids:
            entry = nbest[qid]
            example = gold[qid]
            prediction = entry.candidates[0][0]
            if example.answerable:
                correct = exact_match(
                    prediction, list(example.answers), strict_single=strict_single_answer
                )
            else:
                correct = False
            record: dict = {
                "id": qid,
                "domain": domain,
                "passage_len": _token_count(example.passage),
                "prediction_len": _token_count(prediction),
                "top_probs": _top5([p for _, p in entry.candidates]),
                "correct": correct,
            }
            if squad2:
                record["answerable"] = example.answerable
            if dropout_maps:
                predicted_string = normalize_answer(prediction)
                per_mask = [_string_distribution(dmap[qid]) for dmap in dropout_maps]
                record["dropout_probs"] = [
                    min(1.0, dist.get(predicted_string, 0.0)) for dist in per_mask
                ]
                mean: dict[str, float] = {}
                for dist in per_mask:
                    for key, prob in dist.items():
                        mean[key] = mean.get(key, 0.0) + prob
                k = len(per_mask)
                ranked = sorted(
                    ((min(1.0, total / k), key) for key, total in mean.items()),
                    key=lambda item: (-item[0], item[1]),
                )
                record["dropout_mean_top_probs"] = _top5([p for p, _ in ranked])
            fh.write(json.dumps(record) + "\n")
            written += 1
    return written
