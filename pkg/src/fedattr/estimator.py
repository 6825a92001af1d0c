"""Paired-subset update estimator with rejection sampling of query designs.

A design for target ``i`` is ``M`` include-target subsets ``U_m`` (size N+1)
and ``M`` exclude-target subsets ``V_m`` (size N). The estimate is the
difference of their mean subset sums, which expands to

    Delta_hat_i = Delta_i + sum_{j != i} alpha_j Delta_j,

where ``alpha_j`` is client ``j``'s net inclusion frequency. A proposal is
accepted only when the masking strength ``c = sum alpha_j^2`` and the
effective size ``c^2 / sum alpha_j^4`` both reach ``aN = N (1 - rho) / M``.
The acceptance test is evaluated in exact integer arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from .errors import DegenerateError, RetryLimitExceeded, SubsetSizeError, UnknownClient
from .protocol import ProtocolConfig
from .sa import RoundVault


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def acceptance_threshold(K: int, N: int, M: int) -> float:
    """``aN = N (1 - N/(K-1)) / M``."""
    return N * (1.0 - N / (K - 1)) / M


def expected_masking_strength(K: int, N: int, M: int) -> float:
    """Exact proposal mean of ``c``: ``2 N (1 - N/(K-1)) / M``."""
    return 2.0 * N * (1.0 - N / (K - 1)) / M


def variance_factor(K: int, N: int) -> float:
    """``N (K - 1 - N) / (K - 2)``."""
    if K <= 2:
        raise DegenerateError("variance factor needs K > 2")
    return N * (K - 1 - N) / (K - 2)


def acceptance_lower_bound(K: int, N: int, M: int) -> float:
    """Conservative concentration bound on the proposal acceptance probability.

    Clipped at 0; loose at desk scale, which is why rates are measured.
    """
    rho = N / (K - 1)
    R = 2 * M * M - M
    fail = 2.0 * R * np.exp(-N * (1.0 - rho) ** 2 / (2.0 * (2 * M - 1) ** 2))
    return float(1.0 - min(1.0, fail))


# ---------------------------------------------------------------------------
# designs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QueryDesign:
    target: int
    U_sets: tuple[tuple[int, ...], ...]
    V_sets: tuple[tuple[int, ...], ...]
    others: tuple[int, ...]          # non-target clients, aligned with ``alpha``
    diff: np.ndarray = field(repr=False)  # integer A_j - B_j, aligned with ``others``
    c: float = 0.0
    m_eff: float = 0.0
    accepted: bool = False
    redraws: int = 0

    @property
    def M(self) -> int:
        return len(self.U_sets)

    @property
    def N(self) -> int:
        return len(self.V_sets[0])

    @property
    def alpha(self) -> np.ndarray:
        return self.diff / self.M

    def alpha_full(self, K: int) -> np.ndarray:
        """Masking coefficients as a length-``K`` vector; the target's own entry is 1."""
        out = np.zeros(K)
        out[list(self.others)] = self.alpha
        out[self.target] = 1.0
        return out

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "U_sets": [list(u) for u in self.U_sets],
            "V_sets": [list(v) for v in self.V_sets],
            "alpha": {str(j): float(a) for j, a in zip(self.others, self.alpha)},
            "c": self.c,
            "m_eff": self.m_eff,
            "accepted": self.accepted,
            "redraws": self.redraws,
        }


def masking_stats(diff: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """``(c, m_eff)`` from integer inclusion differences (last axis = clients)."""
    d = np.asarray(diff, dtype=np.float64)
    s2 = (d * d).sum(axis=-1)
    s4 = (d ** 4).sum(axis=-1)
    c = s2 / M ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        m_eff = np.where(s2 > 0, s2 * s2 / np.where(s4 > 0, s4, 1.0), 0.0)
    return c, m_eff


def accepted_mask(diff: np.ndarray, N: int, M: int) -> np.ndarray:
    """Exact acceptance test on integer differences; ``L`` = number of non-targets.

    c >= aN      <=>  S2 * L >= N (L - N) M
    m_eff >= aN  <=>  S2^2 * L * M >= S4 * N (L - N)
    plus N < L.
    """
    d = np.asarray(diff, dtype=np.int64)
    L = d.shape[-1]
    if N >= L:
        return np.zeros(d.shape[:-1], dtype=bool)
    s2 = (d * d).sum(axis=-1)
    s4 = (d ** 4).sum(axis=-1)
    rhs = N * (L - N)
    return (s2 * L >= rhs * M) & (s2 * s2 * L * M >= s4 * rhs)


def _pool(K: int, target: int, clients: Sequence[int] | None) -> np.ndarray:
    ids = np.arange(K) if clients is None else np.asarray(sorted(int(c) for c in clients))
    if target not in set(ids.tolist()):
        raise UnknownClient(f"target {target} is not an active client")
    return ids[ids != target]


def propose_batch(N: int, M: int, pool_size: int, n: int, rng: np.random.Generator):
    """``n`` proposals as pool positions: include-side ``(n, M, N)``, exclude-side, diff ``(n, L)``."""
    if not 1 <= N <= pool_size:
        raise SubsetSizeError(f"need 1 <= N <= {pool_size}, got {N}")
    u = rng.random((n, 2 * M, N))
    pos = _accel.partial_shuffle(pool_size, u.reshape(n * 2 * M, N)).reshape(n, 2 * M, N)
    inc, exc = pos[:, :M], pos[:, M:]
    diff = _accel.inclusion_diff(inc, exc, pool_size)
    return inc, exc, diff


def _make_design(target, others, inc, exc, diff, N, M, redraws) -> QueryDesign:
    c, m_eff = masking_stats(diff, M)
    ok = bool(accepted_mask(diff, N, M))
    U = tuple(tuple(sorted([target] + [int(others[q]) for q in row])) for row in inc)
    V = tuple(tuple(sorted(int(others[q]) for q in row)) for row in exc)
    diff = np.asarray(diff, dtype=np.int64)
    diff.setflags(write=False)
    return QueryDesign(target=int(target), U_sets=U, V_sets=V, others=tuple(int(o) for o in others),
                       diff=diff, c=float(c), m_eff=float(m_eff), accepted=ok, redraws=redraws)


def propose_design(cfg: ProtocolConfig, target: int, rng: np.random.Generator,
                   clients: Sequence[int] | None = None) -> QueryDesign:
    """One proposal; ``accepted`` is set by the privacy check but no retry happens."""
    others = _pool(cfg.K, target, clients)
    inc, exc, diff = propose_batch(cfg.N, cfg.M, len(others), 1, rng)
    return _make_design(target, others, inc[0], exc[0], diff[0], cfg.N, cfg.M, 0)


def design_from_sets(target: int, U_sets, V_sets, K: int) -> QueryDesign:
    """Build a design from explicit subsets (audits, hand-built cases)."""
    others = np.array([j for j in range(K) if j != target])
    if any(target not in u for u in U_sets) or any(target in v for v in V_sets):
        raise SubsetSizeError("U sets must contain the target and V sets must exclude it")
    index = {int(j): q for q, j in enumerate(others)}
    inc = np.array([[index[j] for j in u if j != target] for u in U_sets])
    exc = np.array([[index[j] for j in v] for v in V_sets])
    M, N = exc.shape
    if inc.shape != (M, N):
        raise SubsetSizeError("need M include sets of size N+1 and M exclude sets of size N")
    diff = _accel.inclusion_diff(inc[None], exc[None], len(others))[0]
    return _make_design(target, others, inc, exc, diff, N, M, 0)


def rejection_check(design: QueryDesign, cfg: ProtocolConfig | None = None) -> bool:
    """True iff ``c >= aN``, ``m_eff >= aN`` and ``N < K - 1`` (exact)."""
    N, M = design.N, design.M
    if cfg is not None and (cfg.N, cfg.M) != (N, M):
        raise SubsetSizeError("design sizes do not match the configuration")
    return bool(accepted_mask(design.diff, N, M))


def sample_accepted_design(cfg: ProtocolConfig, target: int, rng: np.random.Generator,
                           clients: Sequence[int] | None = None,
                           max_redraws: int | None = None) -> QueryDesign:
    """Redraw proposals until the privacy check passes. Consumes no SA queries."""
    cap = cfg.max_redraws if max_redraws is None else max_redraws
    others = _pool(cfg.K, target, clients)
    L = len(others)
    if cfg.N >= L:
        raise SubsetSizeError(f"N={cfg.N} must be < number of non-target clients {L}")
    for attempt in range(cap):
        inc, exc, diff = propose_batch(cfg.N, cfg.M, L, 1, rng)
        if accepted_mask(diff[0], cfg.N, cfg.M):
            return _make_design(target, others, inc[0], exc[0], diff[0], cfg.N, cfg.M, attempt)
    raise RetryLimitExceeded(f"no acceptable design for target {target} after {cap} proposals")


def estimate_update(vault: RoundVault, design: QueryDesign) -> np.ndarray:
    """Mean include-side sum minus mean exclude-side sum; exactly ``2M`` SA queries."""
    if not design.accepted:
        raise ValueError("refusing to query SA with a rejected design")
    inc = np.stack([vault.subset_sum(U) for U in design.U_sets]).astype(np.longdouble)
    exc = np.stack([vault.subset_sum(V) for V in design.V_sets]).astype(np.longdouble)
    M = design.M
    # extended-precision accumulation: M copies of one vector average back to it exactly
    return (inc.sum(axis=0) / M - exc.sum(axis=0) / M).astype(np.float64)


def variance_bound(cfg: ProtocolConfig, nontarget_updates, p_accept: float) -> float:
    """Trace bound ``(1/p) (2/M) N(K-1-N)/(K-2) tr(Sigma_{-i})`` on the accepted-design covariance.

    ``Sigma_{-i}`` is the population covariance of the non-target updates
    about their mean (normalized by ``K - 1``).
    """
    if not 0.0 < p_accept <= 1.0:
        raise ValueError("p_accept must lie in (0, 1]")
    X = np.asarray(nontarget_updates, dtype=np.float64)
    L = X.shape[0]
    if L + 1 <= 2:
        raise DegenerateError("variance bound needs K > 2")
    centered = X - X.mean(axis=0)
    trace = float((centered * centered).sum() / L)
    return (1.0 / p_accept) * (2.0 / cfg.M) * variance_factor(L + 1, cfg.N) * trace


def acceptance_rate(cfg: ProtocolConfig, n_proposals: int, rng: np.random.Generator,
                    chunk: int = 50_000) -> tuple[float, np.ndarray]:
    """Measured proposal acceptance rate and the per-proposal masking strengths."""
    L = cfg.K - 1
    accepted = 0
    cs = []
    left = n_proposals
    while left > 0:
        n = min(chunk, left)
        _, _, diff = propose_batch(cfg.N, cfg.M, L, n, rng)
        accepted += int(accepted_mask(diff, cfg.N, cfg.M).sum())
        cs.append(masking_stats(diff, cfg.M)[0])
        left -= n
    return accepted / n_proposals, np.concatenate(cs)
