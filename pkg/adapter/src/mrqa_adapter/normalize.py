"""SQuAD-style answer normalization and exact match."""

from __future__ import annotations

import re
import string

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop ASCII punctuation, drop articles, collapse whitespace.

    The steps run in that order, matching the official SQuAD evaluation
    script, so e.g. "a-b" loses its hyphen before article removal and stays
    "ab".
    """
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, golds: list[str], strict_single: bool = False) -> bool:
    """True iff the normalized prediction equals any normalized gold.

    ``strict_single`` restricts matching to the first gold answer only.
    """
    if not golds:
        raise ValueError("exact_match needs at least one gold answer")
    candidates = golds[:1] if strict_single else golds
    normalized = normalize_answer(prediction)
    return any(normalized == normalize_answer(g) for g in candidates)
