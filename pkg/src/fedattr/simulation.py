"""End-to-end attribution runs: local updates, SA vault, paired-subset estimates, scoring.

Each round every participating client produces an update, the server places
them in a :class:`RoundVault`, samples an accepted design per target, forms
the estimate from subset sums only, and scores it differentially against the
current global model. The direct-scoring baseline is computed on the side
from the plaintext updates; it never feeds the attribution path.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .attribution import AttributionReport, ScoreTrace
from .config import BigramParams, ExperimentConfig, SyntheticParams
from .estimator import estimate_update, sample_accepted_design
from .errors import ConfigError
from .privacy import assess
from .protocol import aggregate, participant_weights
from .rng import derive_seed, stream
from .sa import RoundVault
from .scoring import ProjectionScore, ScoreContext, differential_from_reference, direct_score, kgw_score
from .updates import (BigramModel, GreenListKey, SyntheticUpdateSpec, mixed_corpus, random_teacher,
                      synth_updates, train_on_counts)
from . import _accel


def thread_count() -> int:
    """Worker threads from ``FEDATTR_THREADS`` (default: all cores)."""
    raw = os.environ.get("FEDATTR_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"FEDATTR_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"FEDATTR_THREADS must be a positive integer, got {raw!r}")
    return n


def _map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def balanced_participation(K: int, T: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """``(K, T)`` mask with ``round(p K)`` clients per round, least-used clients first.

    Ties are broken at random. When ``round(p K) * T`` is a multiple of ``K``
    every client participates in exactly that many rounds divided by ``K``.
    """
    C = int(round(p * K))
    if not 1 <= C <= K:
        raise ConfigError(f"participation {p} selects {C} of {K} clients")
    mask = np.zeros((K, T), dtype=bool)
    counts = np.zeros(K, dtype=np.int64)
    for t in range(T):
        order = np.lexsort((rng.random(K), counts))
        chosen = order[:C]
        mask[chosen, t] = True
        counts[chosen] += 1
    return mask


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------

class _Backend:
    score_fn: Callable
    d_star: int | None = None

    def initial_model(self) -> np.ndarray:
        raise NotImplementedError

    def updates(self, t: int, w: np.ndarray, clients: list[int], threads: int) -> np.ndarray:
        raise NotImplementedError

    def context(self, t: int):
        raise NotImplementedError


class _BigramBackend(_Backend):
    def __init__(self, exp: ExperimentConfig, seed: int):
        bp: BigramParams = exp.backend_params
        self.bp = bp
        self.seed = seed
        self.key = GreenListKey(secret=bp.key_secret, gamma_green=bp.gamma_green, delta_boost=bp.delta_boost)
        self.teacher = random_teacher(bp.vocab_size, bp.teacher_scale, stream(seed, -1, -1, "teacher"))
        flags = exp.wm_flags
        self.counts = []
        for k in range(exp.protocol.K):
            ratio = exp.wm_mix_ratio if flags[k] else 0.0
            docs = mixed_corpus(self.teacher, self.key, bp.docs_per_client, bp.doc_len, ratio,
                                stream(seed, -1, k, "corpus"))
            self.counts.append(_accel.bigram_counts(docs, bp.vocab_size))
        self.prompts = tuple(stream(seed, -1, -1, "prompts").integers(0, bp.vocab_size, bp.n_prompts).tolist())
        self.score_fn = lambda w, ctx: kgw_score(w, ctx)

    def initial_model(self) -> np.ndarray:
        return self.teacher.vector

    def updates(self, t, w, clients, threads):
        model = BigramModel.from_vector(w, self.bp.vocab_size)
        fn = lambda k: train_on_counts(model, self.counts[k], self.bp.lr, self.bp.epochs)
        return np.stack(_map(fn, clients, threads))

    def context(self, t):
        return ScoreContext(self.prompts, self.bp.gen_len, self.key,
                            derive_seed(self.seed, t, -1, "detect"), self.bp.temperature)


class _SyntheticBackend(_Backend):
    def __init__(self, exp: ExperimentConfig, seed: int):
        sp: SyntheticParams = exp.backend_params
        d = exp.protocol.d
        self.sp = sp
        self.seed = seed
        self.flags = np.asarray(exp.wm_flags)
        self.d_star = d if sp.d_star is None else sp.d_star
        u = stream(seed, -1, -1, "wm_direction").standard_normal(d)
        self.direction = u / np.linalg.norm(u)
        self.cov = np.zeros(d)
        self.cov[: self.d_star] = sp.sigma ** 2
        self.strength = sp.wm_gain * exp.wm_mix_ratio
        self.score_fn = ProjectionScore(self.direction)

    def initial_model(self):
        return np.zeros(self.direction.shape[0])

    def _mu(self, t):
        v = stream(self.seed, t, -1, "mu").standard_normal(self.direction.shape[0])
        v -= np.dot(v, self.direction) * self.direction
        n = np.linalg.norm(v)
        return self.sp.mu_scale * v / n if n > 0 else v

    def updates(self, t, w, clients, threads):
        spec = SyntheticUpdateSpec(self._mu(t), self.cov, self.direction, self.strength)
        full = synth_updates(spec, self.flags, stream(self.seed, t, -1, "updates"))
        return full[clients]

    def context(self, t):
        return None


def make_backend(exp: ExperimentConfig, seed: int) -> _Backend:
    return _BigramBackend(exp, seed) if exp.backend == "bigram" else _SyntheticBackend(exp, seed)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RunResult:
    seed: int
    trace: ScoreTrace
    report: AttributionReport
    direct_trace: ScoreTrace
    direct_report: AttributionReport
    query_count: int
    expected_queries: int
    redraws: np.ndarray
    reference_scores: list[float]
    designs: list[dict] = field(default_factory=list)
    leakage: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        truth = self.report.truth
        pos = self.report.Z[truth] if truth is not None else np.array([])
        neg = self.report.Z[~truth] if truth is not None else self.report.Z
        return {
            "seed": self.seed,
            "tpr": self.report.tpr,
            "fpr": self.report.fpr,
            "n_flagged": self.report.n_flagged,
            "mean_Z_pos": float(pos.mean()) if pos.size else None,
            "mean_Z_neg": float(neg.mean()) if neg.size else None,
            "min_Z_pos": float(pos.min()) if pos.size else None,
            "max_Z_neg": float(neg.max()) if neg.size else None,
            "direct_tpr": self.direct_report.tpr,
            "direct_fpr": self.direct_report.fpr,
            "direct_benign_flags": int((self.direct_report.verdicts & ~truth).sum()) if truth is not None else None,
            "sa_queries": self.query_count,
            "expected_queries": self.expected_queries,
            "total_redraws": int(self.redraws.sum()),
        }


def run_attribution(exp: ExperimentConfig, seed: int, threads: int | None = None,
                    keep_designs: bool = False) -> RunResult:
    """One full run of ``T`` rounds for a single master seed."""
    cfg = exp.protocol.replace(master_seed=seed)
    K, T = cfg.K, cfg.T
    threads = thread_count() if threads is None else threads
    backend = make_backend(exp, seed)
    if cfg.participation < 1.0:
        part = balanced_participation(K, T, cfg.participation, stream(seed, -1, -1, "participation"))
    else:
        part = np.ones((K, T), dtype=bool)

    w = backend.initial_model()
    z = np.zeros((K, T))
    zd = np.zeros((K, T))
    redraws = np.zeros((K, T), dtype=np.int64)
    refs: list[float] = []
    designs: list[dict] = []
    leakage: list[dict] = []
    queries = 0
    expected = 0
    for t in range(T):
        clients = [int(k) for k in np.flatnonzero(part[:, t])]
        deltas = backend.updates(t, w, clients, threads)
        vault = RoundVault(t, deltas, cfg.N_sa, clients=clients)
        ctx = backend.context(t)
        ref = backend.score_fn(w, ctx)
        refs.append(float(ref))

        def attribute(i: int, _t=t, _w=w, _vault=vault, _ctx=ctx, _ref=ref, _clients=clients):
            design = sample_accepted_design(cfg, i, stream(seed, _t, i, "design"), clients=_clients)
            est = estimate_update(_vault, design)
            return design, differential_from_reference(backend.score_fn, _w, est, _ctx, _ref)

        results = _map(attribute, clients, threads)
        # baseline: the plaintext update scored without reference subtraction
        direct = _map(lambda r, _w=w, _d=deltas, _ctx=ctx: float(direct_score(backend.score_fn, _w, _d[r], _ctx)),
                      list(range(len(clients))), threads)
        for r, i in enumerate(clients):
            design, zi = results[r]
            z[i, t] = zi
            zd[i, t] = direct[r]
            redraws[i, t] = design.redraws
            if keep_designs:
                designs.append({"round": t + 1, **design.to_dict()})
            if backend.d_star is not None:
                leakage.append({"round": t + 1, "client": i,
                                **assess(design, len(clients), backend.d_star).to_dict()})
        queries += vault.query_count
        expected += 2 * cfg.M * len(clients)
        w = aggregate(w, list(deltas), participant_weights(cfg.weights, part[:, t])[clients])

    truth = np.asarray(exp.wm_flags)
    trace = ScoreTrace(z, part)
    dtrace = ScoreTrace(zd, part)
    return RunResult(seed=seed, trace=trace, report=AttributionReport.from_trace(trace, cfg.gamma_thresh, truth),
                     direct_trace=dtrace,
                     direct_report=AttributionReport.from_trace(dtrace, cfg.gamma_thresh, truth),
                     query_count=queries, expected_queries=expected, redraws=redraws,
                     reference_scores=refs, designs=designs, leakage=leakage)
