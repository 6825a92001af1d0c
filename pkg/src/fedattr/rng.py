"""Deterministic per-purpose random streams.

A stream is identified by ``(master_seed, round, client, tag)`` and hashed
through :class:`numpy.random.SeedSequence`. Streams never share state, so work
can be scheduled in any order (or in parallel) without changing results.
"""
from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(master_seed: int, round_: int = 0, client: int = 0, tag: str = "") -> np.random.Generator:
    """Independent generator for one ``(seed, round, client, purpose)`` cell.

    ``round_`` and ``client`` may be ``-1`` for run-level streams.
    """
    words = [int(master_seed) & _MASK64, int(round_) + 1, int(client) + 1, tag_id(tag)]
    return np.random.default_rng(np.random.SeedSequence(words))


def derive_seed(master_seed: int, round_: int = 0, client: int = 0, tag: str = "") -> int:
    """A 64-bit integer seed for the same cell (used where a plain seed is stored)."""
    words = [int(master_seed) & _MASK64, int(round_) + 1, int(client) + 1, tag_id(tag)]
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32) | int(state[1])
