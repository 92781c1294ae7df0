"""Deterministic seed derivation.

All randomness in the toolkit flows from explicit integer seeds.  Composite
procedures (experiment splits, per-tree RNG streams, ...) derive child seeds
from a master seed through :func:`derive_seed`, so every sub-stream is stable
regardless of execution order or thread count.

The derivation is ``sha256("{master}:{tag}:{index}")`` truncated to 64 bits,
which is platform- and version-independent.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    """Derive an independent child seed from (master, purpose tag, index)."""
    digest = hashlib.sha256(f"{master}:{tag}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
