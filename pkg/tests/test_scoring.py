import math

import numpy as np
import pytest
from scipy import stats

from fedattr.scoring import (ProjectionScore, ScoreContext, SyntheticScoreSpec, differential_score, direct_score,
                             kgw_score, kgw_z, shifted, synth_score, synth_scores)
from fedattr.updates import BigramModel, GreenListKey, gen_corpus, random_teacher, train_local


def _ctx(seed=0, n=32, V=64):
    prompts = tuple(np.random.default_rng(seed).integers(0, V, n).tolist())
    return ScoreContext(prompts, 64, GreenListKey(), seed)


def test_kgw_z_null_centered():
    assert kgw_z(25, 100, 0.25) == 0.0


def test_kgw_z_scalar_example():
    assert kgw_z(40, 100, 0.25) == pytest.approx(15 / math.sqrt(18.75), rel=1e-15)


def test_uniform_model_null_mean():
    w = np.zeros(64 * 64)
    zs = [kgw_score(w, _ctx(seed)) for seed in range(100)]
    assert abs(np.mean(zs)) < 0.5


def test_kgw_score_deterministic():
    w = random_teacher(64, 2.0, np.random.default_rng(0)).vector
    assert kgw_score(w, _ctx(3)) == kgw_score(w, _ctx(3))
    assert kgw_score(BigramModel.from_vector(w), _ctx(3)) == kgw_score(w, _ctx(3))


def test_context_validation():
    with pytest.raises(ValueError):
        ScoreContext((), 64)
    with pytest.raises(ValueError):
        ScoreContext((1,), 0)
    assert ScoreContext((1, 2), 10).with_seed(7).detection_rng_seed == 7


def test_zero_delta_differential_is_zero():
    w = random_teacher(64, 2.0, np.random.default_rng(1)).vector
    assert differential_score(kgw_score, w, np.zeros_like(w), _ctx()) == 0.0


def test_shift_leaves_differential_unchanged():
    rng = np.random.default_rng(2)
    fn = ProjectionScore(rng.standard_normal(8))
    w, delta = rng.standard_normal(8), rng.standard_normal(8)
    base = differential_score(fn, w, delta, None)
    for b in (1e-9, 0.1, -3.7, 12345.678, 1e12):
        assert differential_score(shifted(fn, b), w, delta, None) == base


def test_direct_minus_differential_is_reference():
    rng = np.random.default_rng(3)
    w = rng.normal(0, 0.1, 64 * 64)
    delta = rng.normal(0, 0.5, 64 * 64)
    ctx = _ctx(4)
    gap = direct_score(kgw_score, w, delta, ctx) - differential_score(kgw_score, w, delta, ctx)
    assert gap == pytest.approx(kgw_score(w, ctx), abs=1e-12)


def test_direct_score_of_zero_model_is_finite():
    assert math.isfinite(direct_score(kgw_score, np.zeros(64 * 64), np.zeros(64 * 64), _ctx()))


def test_differential_removes_accumulated_bias():
    # a global model that already carries the watermark: the benign client's
    # direct score inherits it, the differential score does not
    key = GreenListKey()
    rng = np.random.default_rng(5)
    teacher = random_teacher(64, 2.0, rng)
    w = teacher.vector + train_local(teacher, gen_corpus(teacher, key, 300 * 64, rng), 20.0, 50)
    benign = train_local(BigramModel.from_vector(w), gen_corpus(teacher, None, 300 * 64, rng), 20.0, 50) * 0.1
    ctx = _ctx(6)
    assert direct_score(kgw_score, w, benign, ctx) > 4.0
    assert abs(differential_score(kgw_score, w, benign, ctx)) < 4.0


def test_synth_score_noise_free():
    spec = SyntheticScoreSpec(m=3.3, eps=1.2, nu=1e-300)
    assert synth_score(spec, True, np.random.default_rng(0)) == 3.3


def test_synthetic_defaults():
    spec = SyntheticScoreSpec()
    assert (spec.m, spec.eps, spec.nu) == (3.3, 1.2, 0.85)
    with pytest.raises(ValueError):
        SyntheticScoreSpec(m=1.0, eps=1.0)
    with pytest.raises(ValueError):
        SyntheticScoreSpec(nu=0.0)


def test_watermarked_variance():
    spec = SyntheticScoreSpec()
    x = synth_scores(spec, np.ones(100_000, bool), 1, np.random.default_rng(1)).ravel()
    assert abs(x.var(ddof=1) / spec.nu ** 2 - 1) < 0.03
    assert abs(x.mean() - spec.m) < 5 * spec.nu / math.sqrt(x.size)


def test_benign_mean_within_band_and_residuals_gaussian():
    spec = SyntheticScoreSpec()
    rng = np.random.default_rng(2)
    b = np.array([synth_score(spec, False, rng) for _ in range(20_000)])
    assert abs(b.mean()) <= spec.eps
    w = synth_scores(spec, np.ones(10_000, bool), 1, rng).ravel()
    assert stats.kstest((w - spec.m) / spec.nu, "norm").pvalue > 0.01


def test_projection_score():
    fn = ProjectionScore(np.array([0.0, 2.0]), scale=4.0)
    assert fn(np.array([1.0, 3.0])) == 1.5
