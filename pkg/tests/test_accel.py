import os
import subprocess
import sys

import numpy as np
import pytest

from fedattr import _accel

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba path disabled")


@needs_numba
def test_sample_chains_paths_identical():
    rng = np.random.default_rng(0)
    logits = rng.normal(0, 2, (32, 32))
    p = np.exp(logits - logits.max(1, keepdims=True))
    cdf = np.cumsum(p / p.sum(1, keepdims=True), axis=1)
    first = rng.integers(0, 32, 50)
    u = rng.random((50, 40))
    np.testing.assert_array_equal(_accel._sample_chains_numba(cdf, first, u),
                                  _accel._sample_chains_numpy(cdf, first, u))


@needs_numba
def test_partial_shuffle_paths_identical():
    u = np.random.default_rng(1).random((1000, 5))
    np.testing.assert_array_equal(_accel._partial_shuffle_numba(np.int64(9), u), _accel._partial_shuffle_numpy(9, u))


@needs_numba
def test_inclusion_diff_paths_identical():
    rng = np.random.default_rng(2)
    inc = rng.integers(0, 9, (200, 5, 5))
    exc = rng.integers(0, 9, (200, 5, 5))
    np.testing.assert_array_equal(_accel._inclusion_diff_numba(inc, exc, np.int64(9)),
                                  _accel._inclusion_diff_numpy(inc, exc, 9))


@needs_numba
def test_count_green_paths_identical():
    rng = np.random.default_rng(3)
    toks = rng.integers(0, 16, (20, 30))
    green = rng.random((16, 16)) < 0.25
    assert _accel._count_green_numba(toks, green) == int(green[toks[:, :-1], toks[:, 1:]].sum())


def test_partial_shuffle_draws_distinct_positions():
    out = _accel.partial_shuffle(9, np.random.default_rng(4).random((500, 5)))
    assert all(len(set(r)) == 5 for r in out.tolist())
    assert out.min() >= 0 and out.max() <= 8
    with pytest.raises(ValueError):
        _accel.partial_shuffle(3, np.zeros((2, 4)))


def test_last_uniform_edge_clips():
    cdf = np.array([[0.5, 1.0 - 1e-17], [0.5, 0.9999999]])
    out = _accel.sample_chains(cdf, np.array([1]), np.array([[0.99999999]]))
    assert out.tolist() == [[1, 1]]


def test_env_flag_forces_numpy_and_results_match():
    code = ("import numpy as np; from fedattr import _accel; from fedattr.config import *; "
            "from fedattr.simulation import run_attribution; from fedattr.protocol import ProtocolConfig; "
            "bp=BigramParams(vocab_size=16, docs_per_client=40, doc_len=32, n_prompts=8, gen_len=32, epochs=10); "
            "r=run_attribution(ExperimentConfig(protocol=ProtocolConfig(d=256, T=2), backend_params=bp), 0, threads=1); "
            "print(_accel.backend_name()); print(r.trace.z.tobytes().hex())")
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, FEDATTR_DISABLE_NUMBA=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                   check=True).stdout.split())
    assert outs[0][0] == "numpy"
    if _accel.HAVE_NUMBA:
        assert outs[1][0] == "numba"
    assert outs[0][1] == outs[1][1]
