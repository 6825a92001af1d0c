"""Watermark scores, the differential transform, and the direct-scoring baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from . import _accel
from .protocol import as_vector
from .updates import BigramModel, GreenListKey, green_mask

Score = Union[float, Fraction]
ScoreFn = Callable[[np.ndarray, object], Score]


@dataclass(frozen=True)
class ScoreContext:
    """Evaluation prompts (context tokens) and decoding settings for one round."""

    prompts: tuple[int, ...]
    gen_len: int = 64
    key: GreenListKey = GreenListKey()
    detection_rng_seed: int = 0
    temperature: float = 1.0

    def __post_init__(self):
        if self.gen_len < 1:
            raise ValueError("gen_len must be >= 1")
        if len(self.prompts) == 0:
            raise ValueError("need at least one prompt")
        object.__setattr__(self, "prompts", tuple(int(p) for p in self.prompts))

    @property
    def n_tokens(self) -> int:
        return len(self.prompts) * self.gen_len

    def with_seed(self, seed: int) -> "ScoreContext":
        return ScoreContext(self.prompts, self.gen_len, self.key, int(seed), self.temperature)


def kgw_z(green: int, n_tokens: int, gamma: float) -> float:
    """One-proportion z statistic ``(G - gamma T) / sqrt(T gamma (1 - gamma))``."""
    return (green - gamma * n_tokens) / math.sqrt(n_tokens * gamma * (1.0 - gamma))


def _as_model(model) -> BigramModel:
    return model if isinstance(model, BigramModel) else BigramModel.from_vector(model)


def detection_uniforms(ctx: ScoreContext) -> np.ndarray:
    return np.random.default_rng(ctx.detection_rng_seed).random((len(ctx.prompts), ctx.gen_len))


def kgw_score(model, ctx: ScoreContext) -> float:
    """Sample ``gen_len`` tokens after each prompt and z-test the green count.

    Sampling is temperature-scaled inverse-CDF with uniforms drawn from
    ``ctx.detection_rng_seed``, so two models scored under the same context
    share their randomness.
    """
    m = _as_model(model)
    u = detection_uniforms(ctx)
    first = np.asarray(ctx.prompts, dtype=np.int64)
    seqs = _accel.sample_chains(m.cdf(None, ctx.temperature), first, u)
    G = _accel.count_green(seqs, green_mask(ctx.key, m.vocab_size))
    return kgw_z(G, ctx.n_tokens, ctx.key.gamma_green)


def _exact_difference(a: Score, b: Score) -> float:
    # rational arithmetic: (x + b) - (y + b) == x - y holds exactly
    return float(Fraction(a) - Fraction(b))


def differential_score(score_fn: ScoreFn, w_prev, delta_hat, ctx) -> float:
    """``score(w_prev + delta_hat) - score(w_prev)`` under one shared context."""
    w = as_vector(w_prev)
    delta = as_vector(delta_hat, w.shape[0])
    return _exact_difference(score_fn(w + delta, ctx), score_fn(w, ctx))


def differential_from_reference(score_fn: ScoreFn, w_prev, delta_hat, ctx, reference: Score) -> float:
    """As :func:`differential_score` with ``score(w_prev)`` precomputed once per round."""
    w = as_vector(w_prev)
    return _exact_difference(score_fn(w + as_vector(delta_hat, w.shape[0]), ctx), reference)


def direct_score(score_fn: ScoreFn, w_prev, delta, ctx) -> Score:
    """Baseline: score the client's plaintext local model with no reference subtraction."""
    w = as_vector(w_prev)
    return score_fn(w + as_vector(delta, w.shape[0]), ctx)


def shifted(score_fn: ScoreFn, baseline: float) -> ScoreFn:
    """``score_fn + baseline`` evaluated exactly (returns a Fraction)."""
    b = Fraction(baseline)

    def fn(w, ctx):
        return Fraction(score_fn(w, ctx)) + b

    return fn


@dataclass(frozen=True)
class ProjectionScore:
    """Linear detector for the synthetic backend: ``<w, direction> / scale``."""

    direction: np.ndarray
    scale: float = 1.0

    def __call__(self, w, ctx=None) -> float:
        return float(np.dot(as_vector(w, self.direction.shape[0]), self.direction) / self.scale)


# ---------------------------------------------------------------------------
# synthetic per-round scores
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticScoreSpec:
    """Per-round score model: watermarked mean ``m``, benign mean within ``+-eps``, noise ``nu``."""

    m: float = 3.3
    eps: float = 1.2
    nu: float = 0.85

    def __post_init__(self):
        if not (self.m > 0 and 0 <= self.eps < self.m and self.nu > 0):
            raise ValueError("need m > 0, 0 <= eps < m and nu > 0")


def synth_score(spec: SyntheticScoreSpec, is_wm: bool, rng: np.random.Generator) -> float:
    """``mu + nu * g``; ``mu = m`` when watermarked, else uniform on ``[-eps, eps]``."""
    mu = spec.m if is_wm else rng.uniform(-spec.eps, spec.eps)
    return float(mu + spec.nu * rng.standard_normal())


def synth_scores(spec: SyntheticScoreSpec, is_wm: Sequence[bool], T: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`synth_score` for ``len(is_wm)`` clients over ``T`` rounds, shape ``(n, T)``."""
    flags = np.asarray(is_wm, dtype=bool)
    n = flags.shape[0]
    benign_mu = rng.uniform(-spec.eps, spec.eps, size=(n, T))
    mu = np.where(flags[:, None], spec.m, benign_mu)
    return mu + spec.nu * rng.standard_normal((n, T))
