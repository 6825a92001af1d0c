"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat R]

The end-to-end row runs one default attribution in a subprocess per backend,
selected with FEDATTR_DISABLE_NUMBA.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fedattr import _accel


def _inputs(rng: np.random.Generator) -> dict:
    V = 64
    logits = rng.normal(0, 2, (V, V))
    p = np.exp(logits - logits.max(1, keepdims=True))
    cdf = np.cumsum(p / p.sum(1, keepdims=True), axis=1)
    return {
        "cdf": cdf,
        "first": rng.integers(0, V, 256),
        "chain_u": rng.random((256, 64)),
        "shuffle_u": rng.random((200_000, 5)),
        "inc": rng.integers(0, 9, (100_000, 5, 5)),
        "exc": rng.integers(0, 9, (100_000, 5, 5)),
        "tokens": rng.integers(0, V, (256, 65)),
        "green": rng.random((V, V)) < 0.25,
    }


def kernels(x: dict) -> dict:
    return {
        "sample_chains": (lambda: _accel._sample_chains_numba(x["cdf"], x["first"], x["chain_u"]),
                          lambda: _accel._sample_chains_numpy(x["cdf"], x["first"], x["chain_u"])),
        "partial_shuffle": (lambda: _accel._partial_shuffle_numba(np.int64(9), x["shuffle_u"]),
                            lambda: _accel._partial_shuffle_numpy(9, x["shuffle_u"])),
        "inclusion_diff": (lambda: _accel._inclusion_diff_numba(x["inc"], x["exc"], np.int64(9)),
                           lambda: _accel._inclusion_diff_numpy(x["inc"], x["exc"], 9)),
        "count_green": (lambda: _accel._count_green_numba(x["tokens"], x["green"]),
                        lambda: int(x["green"][x["tokens"][:, :-1], x["tokens"][:, 1:]].sum())),
    }


def _end_to_end(disable: bool) -> float:
    code = ("import time; from fedattr.config import ExperimentConfig; from fedattr.simulation import run_attribution; "
            "run_attribution(ExperimentConfig(), 0, threads=1); t=time.perf_counter(); "
            "run_attribution(ExperimentConfig(), 0, threads=1); print(time.perf_counter()-t)")
    env = dict(os.environ, FEDATTR_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        sys.exit("numba is unavailable or disabled; nothing to compare")
    x = _inputs(np.random.default_rng(0))
    print(f"{'kernel':18s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, (fast, slow) in kernels(x).items():
        fast()  # compile
        tf = min(timeit.repeat(fast, number=1, repeat=args.repeat)) * 1e3
        ts = min(timeit.repeat(slow, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:18s} {tf:10.2f} {ts:10.2f} {ts / tf:8.1f}x")
    tf, ts = _end_to_end(False) * 1e3, _end_to_end(True) * 1e3
    print(f"{'default run':18s} {tf:10.2f} {ts:10.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
