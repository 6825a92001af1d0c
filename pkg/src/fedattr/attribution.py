"""Cross-round Stouffer combination, decisions, p-values and confusion rates."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from .errors import NoParticipation, ThresholdInfeasible
from .scoring import SyntheticScoreSpec

_LN10 = math.log(10.0)


@dataclass(frozen=True, eq=False)
class ScoreTrace:
    """``(K, T)`` differential scores; entries where ``participation`` is false are ignored (stored as NaN)."""

    z: np.ndarray
    participation: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64)
        mask = np.array(self.participation, dtype=bool)
        if z.ndim != 2 or mask.shape != z.shape:
            raise ValueError("z and participation must be matching (K, T) arrays")
        if not np.all(np.isfinite(z[mask])):
            raise ValueError("scores must be finite wherever the client participated")
        z[~mask] = np.nan
        z.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "participation", mask)

    @classmethod
    def full(cls, z) -> "ScoreTrace":
        z = np.asarray(z, dtype=np.float64)
        return cls(z, np.ones(z.shape, dtype=bool))

    @property
    def K(self) -> int:
        return self.z.shape[0]

    @property
    def T(self) -> int:
        return self.z.shape[1]


def stouffer(trace: ScoreTrace, client: int) -> float:
    """``Z = sum_{t in T_i} z_t / sqrt(|T_i|)`` over the rounds client ``i`` took part in."""
    rounds = trace.participation[client]
    n = int(rounds.sum())
    if n == 0:
        raise NoParticipation(f"client {client} took part in no round")
    # exact rational mean, then * sqrt(n): a constant row c gives c * sqrt(n) to the bit
    mean = float(sum(map(Fraction, trace.z[client, rounds].tolist())) / n)
    return mean * math.sqrt(n)


def stouffer_all(trace: ScoreTrace) -> np.ndarray:
    return np.array([stouffer(trace, i) for i in range(trace.K)])


def decide(Z: float, gamma: float) -> bool:
    """Flag iff ``Z > gamma``; a tie is not a flag."""
    return bool(Z > gamma)


def p_value(Z) -> float | np.ndarray:
    """One-sided standard-normal tail ``1 - Phi(Z)``."""
    out = special.ndtr(-np.asarray(Z, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def log10_p(Z) -> float | np.ndarray:
    """``log10(1 - Phi(Z))``, finite far into the tail."""
    out = special.log_ndtr(-np.asarray(Z, dtype=np.float64)) / _LN10
    return float(out) if np.ndim(out) == 0 else out


def stouffer_error_bounds(spec: SyntheticScoreSpec, T: int, gamma: float) -> tuple[float, float]:
    """Sub-Gaussian false-positive and false-negative bounds for the Stouffer test at ``T`` rounds."""
    rt = math.sqrt(T)
    if not rt * spec.eps < gamma < rt * spec.m:
        raise ThresholdInfeasible(
            f"gamma={gamma} outside ({rt * spec.eps:.4g}, {rt * spec.m:.4g}) for T={T}")
    two_nu2 = 2.0 * spec.nu ** 2
    fp = math.exp(-(gamma - rt * spec.eps) ** 2 / two_nu2)
    fn = math.exp(-(rt * spec.m - gamma) ** 2 / two_nu2)
    return fp, fn


def tpr_fpr(verdicts: Sequence[bool], truth: Sequence[bool]) -> tuple[float | None, float | None]:
    """Confusion rates; a rate with an empty denominator is ``None``."""
    v = np.asarray(verdicts, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if v.shape != t.shape:
        raise ValueError("verdicts and truth must have equal length")
    pos, neg = int(t.sum()), int((~t).sum())
    tpr = float((v & t).sum() / pos) if pos else None
    fpr = float((v & ~t).sum() / neg) if neg else None
    return tpr, fpr


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class AttributionReport:
    Z: np.ndarray
    p_values: np.ndarray
    log10_p: np.ndarray
    verdicts: np.ndarray
    gamma: float
    truth: np.ndarray | None = None
    tpr: float | None = None
    fpr: float | None = None
    clients: tuple[int, ...] = field(default=())

    @classmethod
    def from_trace(cls, trace: ScoreTrace, gamma: float, truth: Sequence[bool] | None = None) -> "AttributionReport":
        Z = stouffer_all(trace)
        return cls.from_statistics(Z, gamma, truth)

    @classmethod
    def from_statistics(cls, Z, gamma: float, truth: Sequence[bool] | None = None) -> "AttributionReport":
        Z = np.asarray(Z, dtype=np.float64)
        verdicts = np.array([decide(z, gamma) for z in Z])
        tpr = fpr = None
        t = None
        if truth is not None:
            t = np.asarray(truth, dtype=bool)
            tpr, fpr = tpr_fpr(verdicts, t)
        return cls(Z=Z, p_values=np.asarray(p_value(Z)).reshape(-1), log10_p=np.asarray(log10_p(Z)).reshape(-1),
                   verdicts=verdicts, gamma=float(gamma), truth=t, tpr=tpr, fpr=fpr,
                   clients=tuple(range(Z.shape[0])))

    @property
    def n_flagged(self) -> int:
        return int(self.verdicts.sum())

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "Z": [float(z) for z in self.Z],
            "p_values": [float(p) for p in self.p_values],
            "log10_p": [float(p) for p in self.log10_p],
            "verdicts": [bool(v) for v in self.verdicts],
            "truth": None if self.truth is None else [bool(t) for t in self.truth],
            "tpr": self.tpr,
            "fpr": self.fpr,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["client_id", "Z", "log10_p", "verdict", "truth"])
        for i, cid in enumerate(self.clients):
            truth = "" if self.truth is None else int(self.truth[i])
            w.writerow([cid, _fmt(self.Z[i]), _fmt(self.log10_p[i]), int(self.verdicts[i]), truth])
        return buf.getvalue()


def trace_csv(trace: ScoreTrace) -> str:
    """Long-format ``client_id, round, z`` rows for participating entries (rounds are 1-based)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["client_id", "round", "z"])
    for i in range(trace.K):
        for t in range(trace.T):
            if trace.participation[i, t]:
                w.writerow([i, t + 1, _fmt(trace.z[i, t])])
    return buf.getvalue()
