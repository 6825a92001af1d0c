"""Client update generators.

Two backends produce the round's ``K`` updates:

* a synthetic generator, ``Delta_j = mu + xi_j (+ drift on a watermark
  direction for watermarked clients)`` with diagonal Gaussian fluctuations;
* a bigram language-model testbed: clients fine-tune a shared ``V x V`` logit
  table on private corpora, and watermarked clients mix in text sampled with
  KGW green-list boosting, so the watermark transfers through training.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _accel
from .errors import DimensionError, EmptyCorpus
from .protocol import as_vector

_M64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# synthetic backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SyntheticUpdateSpec:
    mu: np.ndarray
    cov_diag: np.ndarray
    wm_direction: np.ndarray
    wm_strength: float = 0.0

    def __post_init__(self):
        mu = as_vector(self.mu)
        cov = as_vector(self.cov_diag, mu.shape[0])
        u = as_vector(self.wm_direction, mu.shape[0])
        if np.any(cov < 0):
            raise ValueError("cov_diag must be nonnegative")
        if abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError("wm_direction must have unit norm")
        if self.wm_strength < 0:
            raise ValueError("wm_strength must be nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov_diag", cov)
        object.__setattr__(self, "wm_direction", u)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def d_star(self) -> int:
        return int(np.count_nonzero(self.cov_diag > 0))


def synth_updates(spec: SyntheticUpdateSpec, wm_flags: Sequence[bool], rng: np.random.Generator) -> np.ndarray:
    """``(K, d)`` array: ``mu + xi_j`` plus ``wm_strength * wm_direction`` where flagged."""
    flags = np.asarray(wm_flags, dtype=bool)
    K = flags.shape[0]
    xi = rng.standard_normal((K, spec.d)) * np.sqrt(spec.cov_diag)
    out = spec.mu + xi
    out[flags] += spec.wm_strength * spec.wm_direction
    return out


# ---------------------------------------------------------------------------
# green lists
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenListKey:
    secret: int = 1234
    gamma_green: float = 0.25
    delta_boost: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.gamma_green < 1.0:
            raise ValueError("gamma_green must lie in (0, 1)")

    def green_size(self, V: int) -> int:
        return int(round(self.gamma_green * V))


def _splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return x, z ^ (z >> 31)


@lru_cache(maxsize=256)
def _green_rows(secret: int, size: int, V: int) -> tuple[tuple[int, ...], ...]:
    rows = []
    for ctx in range(V):
        state, _ = _splitmix64((secret & _M64) ^ ((ctx * 0xD1B54A32D192ED03) & _M64))
        perm = list(range(V))
        for pos in range(size):
            state, r = _splitmix64(state)
            j = pos + r % (V - pos)
            perm[pos], perm[j] = perm[j], perm[pos]
        rows.append(tuple(sorted(perm[:size])))
    return tuple(rows)


def green_list(key: GreenListKey, context: int, V: int = 64) -> frozenset[int]:
    """Green tokens after ``context``: a keyed 64-bit mix seeds a partial shuffle of the vocabulary."""
    if not 0 <= context < V:
        raise ValueError(f"context {context} outside vocabulary of size {V}")
    return frozenset(_green_rows(int(key.secret), key.green_size(V), V)[context])


def green_mask(key: GreenListKey, V: int = 64) -> np.ndarray:
    """Boolean ``(V, V)`` table, ``mask[c, v]`` true when ``v`` is green after ``c``."""
    mask = np.zeros((V, V), dtype=bool)
    for c, row in enumerate(_green_rows(int(key.secret), key.green_size(V), V)):
        mask[c, list(row)] = True
    mask.setflags(write=False)
    return mask


# ---------------------------------------------------------------------------
# bigram model
# ---------------------------------------------------------------------------

def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class BigramModel:
    logits: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.array(self.logits, dtype=np.float64)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise DimensionError("bigram logits must be a square V x V table")
        if not np.all(np.isfinite(z)):
            raise DimensionError("bigram logits must be finite")
        z.setflags(write=False)
        object.__setattr__(self, "logits", z)

    @property
    def vocab_size(self) -> int:
        return self.logits.shape[0]

    @property
    def vector(self) -> np.ndarray:
        return self.logits.reshape(-1).copy()

    @classmethod
    def from_vector(cls, values, vocab_size: int | None = None) -> "BigramModel":
        v = as_vector(values)
        V = int(round(np.sqrt(v.shape[0]))) if vocab_size is None else vocab_size
        if V * V != v.shape[0]:
            raise DimensionError(f"vector of length {v.shape[0]} is not a V*V table")
        return cls(v.reshape(V, V))

    def probs(self, key: GreenListKey | None = None, temperature: float = 1.0) -> np.ndarray:
        z = self.logits / temperature
        if key is not None and key.delta_boost != 0.0:
            z = z + key.delta_boost * green_mask(key, self.vocab_size)
        return _softmax_rows(z)

    def cdf(self, key: GreenListKey | None = None, temperature: float = 1.0) -> np.ndarray:
        return np.cumsum(self.probs(key, temperature), axis=1)


def random_teacher(V: int, scale: float, rng: np.random.Generator) -> BigramModel:
    """Teacher with i.i.d. ``N(0, scale^2)`` logits."""
    return BigramModel(rng.normal(0.0, scale, size=(V, V)))


def sample_from(model: BigramModel, first: np.ndarray, steps: int, uniforms: np.ndarray,
                key: GreenListKey | None = None, temperature: float = 1.0) -> np.ndarray:
    """Continue each of ``first`` for ``steps`` tokens using the supplied uniforms."""
    if uniforms.shape != (len(first), steps):
        raise ValueError("uniforms must have shape (len(first), steps)")
    return _accel.sample_chains(model.cdf(key, temperature), first, uniforms)


def gen_corpus(teacher: BigramModel, key: GreenListKey | None, length: int, rng: np.random.Generator,
               doc_len: int = 64) -> np.ndarray:
    """Sample ``ceil(length / doc_len)`` documents of ``doc_len`` tokens.

    With a key, ``delta_boost`` is added to the green logits at every step.
    Returns an ``(n_docs, doc_len)`` token array; each document starts from a
    uniform random token.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    doc_len = min(doc_len, length)
    n_docs = -(-length // doc_len)
    first = rng.integers(0, teacher.vocab_size, size=n_docs)
    u = rng.random((n_docs, doc_len - 1))
    return sample_from(teacher, first, doc_len - 1, u, key)


def mixed_corpus(teacher: BigramModel, key: GreenListKey, n_docs: int, doc_len: int, wm_ratio: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Client corpus: ``round(wm_ratio * n_docs)`` watermarked documents, the rest clean, shuffled."""
    n_wm = int(round(wm_ratio * n_docs))
    parts = []
    if n_wm:
        parts.append(gen_corpus(teacher, key, n_wm * doc_len, rng, doc_len))
    if n_docs - n_wm:
        parts.append(gen_corpus(teacher, None, (n_docs - n_wm) * doc_len, rng, doc_len))
    docs = np.concatenate(parts, axis=0)
    return docs[rng.permutation(docs.shape[0])]


def train_local(w_global: BigramModel, corpus: np.ndarray, lr: float, epochs: int) -> np.ndarray:
    """Full-batch gradient descent on mean next-token cross-entropy; returns ``w_local - w_global``."""
    tokens = np.asarray(corpus)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    if tokens.shape[1] < 2:
        raise EmptyCorpus("corpus needs at least two tokens per document")
    if lr < 0:
        raise ValueError("lr must be nonnegative")
    V = w_global.vocab_size
    C = _accel.bigram_counts(tokens, V)
    return train_on_counts(w_global, C, lr, epochs)


def train_on_counts(w_global: BigramModel, counts: np.ndarray, lr: float, epochs: int) -> np.ndarray:
    n = counts.sum()
    if n < 1:
        raise EmptyCorpus("no transitions to train on")
    rows = counts.sum(axis=1, keepdims=True)
    w = w_global.logits.copy()
    for _ in range(epochs):
        w -= lr * (rows * _softmax_rows(w) - counts) / n
    return (w - w_global.logits).reshape(-1)


def mean_cross_entropy(model: BigramModel, corpus: np.ndarray) -> float:
    C = _accel.bigram_counts(corpus, model.vocab_size)
    logp = np.log(model.probs())
    return float(-(C * logp).sum() / C.sum())


def dump_corpus(path: str | Path, corpus: np.ndarray) -> None:
    """One token id per line, documents separated by blank lines."""
    tokens = np.atleast_2d(np.asarray(corpus))
    with open(path, "w", encoding="ascii") as fh:
        for doc in tokens:
            fh.write("\n".join(str(int(t)) for t in doc))
            fh.write("\n\n")
