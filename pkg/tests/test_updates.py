import numpy as np
import pytest
from scipy import stats

from fedattr.errors import DimensionError, EmptyCorpus
from fedattr.scoring import ScoreContext, kgw_score
from fedattr.updates import (BigramModel, GreenListKey, SyntheticUpdateSpec, dump_corpus, gen_corpus, green_list,
                             green_mask, mean_cross_entropy, mixed_corpus, random_teacher, synth_updates,
                             train_local)


def _unit(d, k=0):
    u = np.zeros(d)
    u[k] = 1.0
    return u


# --- synthetic generator -----------------------------------------------------

def test_zero_fluctuation_gives_mean():
    mu = np.array([1.0, -2.0, 0.5])
    spec = SyntheticUpdateSpec(mu, np.zeros(3), _unit(3))
    out = synth_updates(spec, [False] * 5, np.random.default_rng(0))
    np.testing.assert_array_equal(out, np.tile(mu, (5, 1)))


def test_all_watermarked_zero_mean():
    spec = SyntheticUpdateSpec(np.zeros(4), np.zeros(4), _unit(4, 2), wm_strength=2.5)
    out = synth_updates(spec, [True] * 3, np.random.default_rng(0))
    np.testing.assert_array_equal(out, np.tile(2.5 * _unit(4, 2), (3, 1)))


def test_sample_mean_law_of_large_numbers():
    cov = np.array([0.5, 2.0, 1.0])
    mu = np.array([1.0, 0.0, -3.0])
    spec = SyntheticUpdateSpec(mu, cov, _unit(3))
    out = synth_updates(spec, np.zeros(100_000, bool), np.random.default_rng(1))
    assert np.all(np.abs(out.mean(axis=0) - mu) < 4 * np.sqrt(cov.max() / 1e5))


def test_spec_validation_and_d_star():
    spec = SyntheticUpdateSpec(np.zeros(5), np.array([1.0, 0, 2.0, 0, 0]), _unit(5))
    assert spec.d_star == 2 and spec.d == 5
    with pytest.raises(ValueError):
        SyntheticUpdateSpec(np.zeros(2), np.ones(2), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        SyntheticUpdateSpec(np.zeros(2), -np.ones(2), _unit(2))
    with pytest.raises(DimensionError):
        SyntheticUpdateSpec(np.zeros(2), np.ones(3), _unit(2))


def test_watermark_flags_permute_outputs():
    spec = SyntheticUpdateSpec(np.zeros(3), np.ones(3), _unit(3), wm_strength=5.0)
    flags = np.array([True, False, False, True])
    perm = np.array([2, 0, 3, 1])
    a = synth_updates(spec, flags, np.random.default_rng(7))
    b = synth_updates(spec, flags[perm], np.random.default_rng(7))
    # same noise draws, drift follows the flags
    np.testing.assert_array_equal(b - a, 5.0 * (flags[perm].astype(float) - flags.astype(float))[:, None] * _unit(3))


# --- green lists ---------------------------------------------------------------

def test_green_list_is_deterministic():
    key = GreenListKey(secret=99)
    assert green_list(key, 5) == green_list(key, 5)


def test_green_list_size():
    key = GreenListKey(gamma_green=0.25)
    assert all(len(green_list(key, c)) == 16 for c in range(64))
    assert np.all(green_mask(key).sum(axis=1) == 16)


def test_secrets_produce_different_partitions():
    a, b = GreenListKey(secret=1), GreenListKey(secret=2)
    jac = [len(green_list(a, c) & green_list(b, c)) / len(green_list(a, c) | green_list(b, c)) for c in range(64)]
    assert min(jac) < 1


def test_green_list_bad_context():
    with pytest.raises(ValueError):
        green_list(GreenListKey(), 64)


def test_green_list_stable_across_processes():
    import subprocess
    import sys

    code = "from fedattr.updates import GreenListKey, green_list; print(sorted(green_list(GreenListKey(secret=5), 11)))"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.strip() == str(sorted(green_list(GreenListKey(secret=5), 11)))


# --- corpus generation ---------------------------------------------------------

def test_zero_boost_matches_unkeyed_sampling():
    teacher = random_teacher(64, 1.0, np.random.default_rng(0))
    key = GreenListKey(delta_boost=0.0)
    a = gen_corpus(teacher, key, 100_000, np.random.default_rng(1)).ravel()
    b = gen_corpus(teacher, None, 100_000, np.random.default_rng(2)).ravel()
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_boost_raises_green_fraction():
    teacher = random_teacher(64, 1.0, np.random.default_rng(0))
    key = GreenListKey()
    toks = gen_corpus(teacher, key, 10_000, np.random.default_rng(3))
    mask = green_mask(key)
    frac = mask[toks[:, :-1], toks[:, 1:]].mean()
    assert frac > 0.25 + 5 * np.sqrt(0.25 * 0.75 / 1e4)


def test_uniform_teacher_null_rate():
    teacher = BigramModel(np.zeros((64, 64)))
    key = GreenListKey()
    toks = gen_corpus(teacher, None, 20_000, np.random.default_rng(4))
    mask = green_mask(key)
    n = toks.shape[0] * (toks.shape[1] - 1)
    frac = mask[toks[:, :-1], toks[:, 1:]].mean()
    assert abs(frac - 0.25) < 5 * np.sqrt(0.25 * 0.75 / n)


def test_gen_corpus_shape_and_validation():
    teacher = random_teacher(8, 1.0, np.random.default_rng(0))
    assert gen_corpus(teacher, None, 130, np.random.default_rng(0), doc_len=64).shape == (3, 64)
    assert gen_corpus(teacher, None, 5, np.random.default_rng(0), doc_len=64).shape == (1, 5)
    with pytest.raises(ValueError):
        gen_corpus(teacher, None, 0, np.random.default_rng(0))


def test_mixed_corpus_counts():
    teacher = random_teacher(16, 1.0, np.random.default_rng(0))
    docs = mixed_corpus(teacher, GreenListKey(), 50, 32, 0.2, np.random.default_rng(1))
    assert docs.shape == (50, 32)


# --- local training ------------------------------------------------------------

def test_zero_learning_rate_gives_zero_update():
    model = random_teacher(8, 1.0, np.random.default_rng(0))
    corpus = gen_corpus(model, None, 500, np.random.default_rng(1))
    np.testing.assert_array_equal(train_local(model, corpus, 0.0, 5), np.zeros(64))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    model = random_teacher(4, 1.0, rng)
    corpus = gen_corpus(model, None, 400, rng, doc_len=20)
    lr = 1e-3
    analytic = -train_local(model, corpus, lr, 1) / lr
    h = 1e-5
    fd = np.empty(16)
    base = model.vector
    for k in range(16):
        up, dn = base.copy(), base.copy()
        up[k] += h
        dn[k] -= h
        fd[k] = (mean_cross_entropy(BigramModel.from_vector(up), corpus)
                 - mean_cross_entropy(BigramModel.from_vector(dn), corpus)) / (2 * h)
    assert np.max(np.abs(analytic - fd) / np.abs(fd)) < 1e-5


def test_update_shrinks_with_self_sampled_corpus():
    model = random_teacher(16, 1.0, np.random.default_rng(3))
    norms = [np.linalg.norm(train_local(model, gen_corpus(model, None, n, np.random.default_rng(n)), 1.0, 20))
             for n in (1_000, 10_000, 100_000)]
    assert norms[0] > norms[1] > norms[2]


def test_empty_corpus():
    model = BigramModel(np.zeros((4, 4)))
    with pytest.raises(EmptyCorpus):
        train_local(model, np.array([[1]]), 1.0, 1)
    with pytest.raises(ValueError):
        train_local(model, np.array([[1, 2, 3]]), -1.0, 1)


def test_radioactivity_transfer():
    key = GreenListKey()
    wins = 0
    for rep in range(100):
        rng = np.random.default_rng(1000 + rep)
        teacher = random_teacher(64, 2.0, rng)
        wm = gen_corpus(teacher, key, 300 * 64, rng)
        clean = gen_corpus(teacher, None, 300 * 64, rng)
        ctx = ScoreContext(tuple(rng.integers(0, 64, 32).tolist()), 64, key, rep)
        w = teacher.vector
        z_wm = kgw_score(w + train_local(teacher, wm, 20.0, 50), ctx)
        z_clean = kgw_score(w + train_local(teacher, clean, 20.0, 50), ctx)
        wins += z_wm > z_clean
    assert wins >= 95


def test_bigram_model_validation_and_round_trip(tmp_path):
    with pytest.raises(DimensionError):
        BigramModel(np.zeros((3, 4)))
    with pytest.raises(DimensionError):
        BigramModel(np.full((2, 2), np.inf))
    with pytest.raises(DimensionError):
        BigramModel.from_vector(np.zeros(10))
    m = random_teacher(5, 1.0, np.random.default_rng(0))
    np.testing.assert_array_equal(BigramModel.from_vector(m.vector).logits, m.logits)
    np.testing.assert_allclose(m.probs().sum(axis=1), 1.0)
    path = tmp_path / "c.txt"
    dump_corpus(path, np.array([[1, 2], [3, 4]]))
    assert path.read_text() == "1\n2\n\n3\n4\n\n"
