"""Mutual-information leakage of a released update estimate (Gaussian case)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateError, InsufficientSamples
from .estimator import QueryDesign, acceptance_threshold

MIN_MC_SAMPLES = 10_000


def mi_gaussian_exact(c: float, d_star: int) -> float:
    """``(d*/2) ln(1 + 1/c)`` nats, exact for Gaussian fluctuations with equal per-client covariance."""
    if d_star < 0:
        raise ValueError("d_star must be nonnegative")
    if d_star == 0:
        return 0.0
    if not c > 0:
        raise DegenerateError("c <= 0: the estimate is unmasked and leakage is unbounded")
    return 0.5 * d_star * math.log1p(1.0 / c)


def mi_bound(aN: float, d_star: int, c_xi: float = 0.0) -> float:
    """``(d*/2) ln(1 + 1/aN) + c_xi d* / aN``; ``c_xi = 0`` is the Gaussian case."""
    if not aN > 0:
        raise ValueError("aN must be positive")
    if c_xi < 0:
        raise ValueError("c_xi must be nonnegative")
    return 0.5 * d_star * math.log1p(1.0 / aN) + c_xi * d_star / aN


@dataclass(frozen=True)
class LeakageAssessment:
    c: float
    m_eff: float
    d_star: int
    aN: float
    mi_gaussian: float
    mi_bound: float

    @property
    def within_bound(self) -> bool:
        return self.mi_gaussian <= self.mi_bound

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mi_gaussian_bits"] = self.mi_gaussian / math.log(2.0) if math.isfinite(self.mi_gaussian) else None
        out["mi_gaussian"] = self.mi_gaussian if math.isfinite(self.mi_gaussian) else None
        return out


def assess(design: QueryDesign, K: int, d_star: int, c_xi: float = 0.0) -> LeakageAssessment:
    aN = acceptance_threshold(K, design.N, design.M)
    try:
        mi = mi_gaussian_exact(design.c, d_star)
    except DegenerateError:
        mi = math.inf
    return LeakageAssessment(c=design.c, m_eff=design.m_eff, d_star=d_star, aN=aN,
                             mi_gaussian=mi, mi_bound=mi_bound(aN, d_star, c_xi))


def _joint_samples(alpha: np.ndarray, sigma2: float, n: int, rng: np.random.Generator,
                   target_coef: float) -> tuple[np.ndarray, np.ndarray]:
    x = rng.standard_normal(n) * math.sqrt(sigma2)
    # the non-target sum is Gaussian with variance c * sigma2
    c = float(np.dot(alpha, alpha))
    noise = rng.standard_normal(n) * math.sqrt(c * sigma2)
    return x, target_coef * x + noise


def histogram_mi(x: np.ndarray, y: np.ndarray, bins: int | None = None) -> float:
    """Plug-in MI (nats) on an equal-mass grid, with the Miller-Madow bias correction."""
    n = x.shape[0]
    if bins is None:
        bins = max(8, int(round(n ** (1.0 / 3.0) / 2)))
    rx = np.argsort(np.argsort(x, kind="stable"), kind="stable")
    ry = np.argsort(np.argsort(y, kind="stable"), kind="stable")
    bx = (rx * bins) // n
    by = (ry * bins) // n
    joint = np.bincount(bx * bins + by, minlength=bins * bins).astype(np.float64)
    px = np.bincount(bx, minlength=bins).astype(np.float64)
    py = np.bincount(by, minlength=bins).astype(np.float64)

    def H(counts):
        p = counts[counts > 0] / n
        return -float(np.dot(p, np.log(p))) + (np.count_nonzero(counts) - 1) / (2.0 * n)

    return H(px) + H(py) - H(joint)


def correlation_mi(x: np.ndarray, y: np.ndarray) -> float:
    """``-1/2 ln(1 - r^2)``, exact for jointly Gaussian scalars."""
    r = float(np.corrcoef(x, y)[0, 1])
    return -0.5 * math.log1p(-r * r)


def mi_estimate_mc(design: QueryDesign, cov_diag, n_samples: int, rng: np.random.Generator,
                   method: str = "histogram", target_coef: float = 1.0) -> float:
    """Monte Carlo estimate of ``I(Delta_i; Delta_hat_i)`` for one fixed design on a scalar subspace.

    Every client's fluctuation is ``N(0, sigma^2)`` with ``sigma^2`` the single
    positive entry of ``cov_diag``. ``target_coef=0`` gives the independent
    control case.
    """
    if n_samples < MIN_MC_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    cov = np.asarray(cov_diag, dtype=np.float64).reshape(-1)
    pos = cov[cov > 0]
    if pos.shape[0] != 1:
        raise DegenerateError("the Monte Carlo oracle handles a one-dimensional effective subspace only")
    x, y = _joint_samples(design.alpha, float(pos[0]), n_samples, rng, target_coef)
    if method == "histogram":
        return histogram_mi(x, y)
    if method == "correlation":
        return correlation_mi(x, y)
    raise ValueError(f"unknown method {method!r}")
