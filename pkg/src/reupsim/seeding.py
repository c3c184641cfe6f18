"""Deterministic seed derivation for independent random streams.

A single user-facing seed fans out into per-purpose integer seeds and
per-purpose Philox keys by hashing the seed together with a context string.
Derived streams are independent of each other and stable across runs,
platforms, and worker counts.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, context: str) -> bytes:
    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return hashlib.sha256(f"{seed}|{context}".encode()).digest()


def derive_seed(seed: int, context: str) -> int:
    """A 63-bit integer seed unique to (seed, context)."""
    return int.from_bytes(_digest(seed, context)[:8], "little") >> 1


def derive_key(seed: int, context: str) -> np.ndarray:
    """A 128-bit Philox key for (seed, context) as two uint64 words."""
    raw = _digest(seed, context)[:16]
    return np.frombuffer(raw, dtype=np.uint64).copy()


def counter_uniforms(seed: int, context: str, start: int, count: int) -> np.ndarray:
    """Open-interval (0, 1) uniforms indexed by Philox counter, shape (count, 4).

    Row i holds the four draws of the Philox block at counter start + i under
    the key derived from (seed, context).  Philox increments its counter once
    per 4-word block, so a batched call over a contiguous counter range yields
    exactly the same rows as per-counter calls: values depend only on
    (seed, context, counter), never on how a batch is chunked across workers.
    """
    if start < 0 or count < 0:
        raise ValueError(f"need start >= 0 and count >= 0, got {start}, {count}")
    key = derive_key(seed, context)
    gen = np.random.Generator(np.random.Philox(key=key, counter=[start, 0, 0, 0]))
    bits = gen.integers(0, 2**64, size=(count, 4), dtype=np.uint64, endpoint=False)
    return (bits >> np.uint64(11)) * 2.0**-53 + 2.0**-54
