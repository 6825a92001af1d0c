"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with identical semantics. All randomness
is drawn by the caller (numpy ``Generator``) and passed in as uniforms, so the
two paths consume the same numbers and return bit-identical results.

Set ``FEDATTR_DISABLE_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("FEDATTR_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by FEDATTR_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# autoregressive sampling from a row-stochastic table
# ---------------------------------------------------------------------------

def _sample_chains_numpy(cdf: np.ndarray, first: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    n, steps = uniforms.shape
    vmax = cdf.shape[1] - 1
    out = np.empty((n, steps + 1), dtype=np.int64)
    out[:, 0] = first
    for t in range(steps):
        rows = cdf[out[:, t]]
        idx = (rows < uniforms[:, t : t + 1]).sum(axis=1)
        out[:, t + 1] = np.minimum(idx, vmax)
    return out


@njit(cache=True)
def _sample_chains_numba(cdf, first, uniforms):  # pragma: no cover - compiled
    n, steps = uniforms.shape
    V = cdf.shape[1]
    out = np.empty((n, steps + 1), dtype=np.int64)
    for i in range(n):
        prev = first[i]
        out[i, 0] = prev
        for t in range(steps):
            u = uniforms[i, t]
            k = 0
            for v in range(V):
                if cdf[prev, v] < u:
                    k += 1
            if k > V - 1:
                k = V - 1
            out[i, t + 1] = k
            prev = k
    return out


def sample_chains(cdf: np.ndarray, first: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of ``n`` Markov chains.

    ``cdf[c]`` is the cumulative next-token distribution after context ``c``.
    The next token is the number of CDF entries strictly below the uniform,
    clipped to ``V - 1`` to absorb round-off in the last entry.
    Returns an ``(n, steps + 1)`` array whose first column is ``first``.
    """
    cdf = np.ascontiguousarray(cdf, dtype=np.float64)
    first = np.ascontiguousarray(first, dtype=np.int64)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if HAVE_NUMBA:
        return _sample_chains_numba(cdf, first, uniforms)
    return _sample_chains_numpy(cdf, first, uniforms)


# ---------------------------------------------------------------------------
# partial Fisher-Yates subset draws
# ---------------------------------------------------------------------------

def _partial_shuffle_numpy(pool_size: int, uniforms: np.ndarray) -> np.ndarray:
    rows, k = uniforms.shape
    arr = np.tile(np.arange(pool_size, dtype=np.int64), (rows, 1))
    ridx = np.arange(rows)
    for pos in range(k):
        j = pos + np.floor(uniforms[:, pos] * (pool_size - pos)).astype(np.int64)
        j = np.minimum(j, pool_size - 1)
        tmp = arr[ridx, pos].copy()
        arr[ridx, pos] = arr[ridx, j]
        arr[ridx, j] = tmp
    return arr[:, :k].copy()


@njit(cache=True)
def _partial_shuffle_numba(pool_size, uniforms):  # pragma: no cover - compiled
    rows, k = uniforms.shape
    out = np.empty((rows, k), dtype=np.int64)
    arr = np.empty(pool_size, dtype=np.int64)
    for r in range(rows):
        for q in range(pool_size):
            arr[q] = q
        for pos in range(k):
            j = pos + np.int64(np.floor(uniforms[r, pos] * (pool_size - pos)))
            if j > pool_size - 1:
                j = pool_size - 1
            tmp = arr[pos]
            arr[pos] = arr[j]
            arr[j] = tmp
        for pos in range(k):
            out[r, pos] = arr[pos]
    return out


def partial_shuffle(pool_size: int, uniforms: np.ndarray) -> np.ndarray:
    """Draw one uniform ``k``-subset of ``range(pool_size)`` per row of ``uniforms``.

    ``uniforms`` has shape ``(rows, k)``; position ``pos`` swaps with
    ``pos + floor(u * (pool_size - pos))``. Returns positions, shape ``(rows, k)``.
    """
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if uniforms.ndim != 2 or uniforms.shape[1] > pool_size:
        raise ValueError("need a (rows, k) array with k <= pool_size")
    if HAVE_NUMBA:
        return _partial_shuffle_numba(np.int64(pool_size), uniforms)
    return _partial_shuffle_numpy(pool_size, uniforms)


# ---------------------------------------------------------------------------
# masking statistics from integer inclusion counts
# ---------------------------------------------------------------------------

def _inclusion_diff_numpy(include: np.ndarray, exclude: np.ndarray, pool_size: int) -> np.ndarray:
    n = include.shape[0]
    d = np.zeros((n, pool_size), dtype=np.int64)
    ridx = np.repeat(np.arange(n), include.shape[1] * include.shape[2])
    np.add.at(d, (ridx, include.reshape(-1)), 1)
    np.add.at(d, (ridx, exclude.reshape(-1)), -1)
    return d


@njit(cache=True)
def _inclusion_diff_numba(include, exclude, pool_size):  # pragma: no cover - compiled
    n, M, N = include.shape
    d = np.zeros((n, pool_size), dtype=np.int64)
    for r in range(n):
        for m in range(M):
            for q in range(N):
                d[r, include[r, m, q]] += 1
                d[r, exclude[r, m, q]] -= 1
    return d


def inclusion_diff(include: np.ndarray, exclude: np.ndarray, pool_size: int) -> np.ndarray:
    """Integer ``A_j - B_j`` per design: include-side minus exclude-side membership counts.

    ``include`` / ``exclude`` are ``(n, M, N)`` pool positions. The masking
    coefficient is this difference divided by ``M``.
    """
    include = np.ascontiguousarray(include, dtype=np.int64)
    exclude = np.ascontiguousarray(exclude, dtype=np.int64)
    if HAVE_NUMBA:
        return _inclusion_diff_numba(include, exclude, np.int64(pool_size))
    return _inclusion_diff_numpy(include, exclude, pool_size)


# ---------------------------------------------------------------------------
# green-token counting
# ---------------------------------------------------------------------------

@njit(cache=True)
def _count_green_numba(tokens, green):  # pragma: no cover - compiled
    n, L = tokens.shape
    g = 0
    for i in range(n):
        for t in range(1, L):
            if green[tokens[i, t - 1], tokens[i, t]]:
                g += 1
    return g


def count_green(tokens: np.ndarray, green: np.ndarray) -> int:
    """Number of transitions ``prev -> next`` with ``next`` green for context ``prev``."""
    tokens = np.ascontiguousarray(tokens, dtype=np.int64)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    if HAVE_NUMBA:
        return int(_count_green_numba(tokens, np.ascontiguousarray(green, dtype=np.bool_)))
    return int(green[tokens[:, :-1], tokens[:, 1:]].sum())


def bigram_counts(tokens: np.ndarray, vocab_size: int) -> np.ndarray:
    """``C[c, v]`` = number of within-row transitions ``c -> v``."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    flat = tokens[:, :-1].ravel() * vocab_size + tokens[:, 1:].ravel()
    return np.bincount(flat, minlength=vocab_size * vocab_size).reshape(vocab_size, vocab_size).astype(np.float64)


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
