"""Protocol configuration, parameter vectors and the aggregation rule."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, SubsetSizeError, WeightSumError

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ProtocolConfig:
    """All scalar protocol settings.

    ``aggregation_weights`` of ``None`` means uniform ``1/K``. ``participation``
    is the per-round fraction of clients that submit an update (1.0 = everyone).
    """

    K: int = 10
    T: int = 5
    N: int = 5
    M: int = 5
    N_sa: int = 5
    gamma_thresh: float = 4.0
    d: int = 16
    master_seed: int = 0
    aggregation_weights: tuple[float, ...] | None = None
    participation: float = 1.0
    max_redraws: int = 10_000

    @property
    def weights(self) -> np.ndarray:
        if self.aggregation_weights is None:
            return np.full(self.K, 1.0 / self.K)
        return np.asarray(self.aggregation_weights, dtype=np.float64)

    @property
    def rho(self) -> float:
        """Non-target inclusion ratio ``N / (K - 1)``."""
        return self.N / (self.K - 1)

    @property
    def threshold(self) -> float:
        """Acceptance threshold ``aN = N (1 - rho) / M``."""
        return self.N * (1.0 - self.rho) / self.M

    def replace(self, **changes: Any) -> "ProtocolConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        if self.aggregation_weights is not None:
            out["aggregation_weights"] = list(self.aggregation_weights)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown protocol keys: {sorted(unknown)}")
        kw = dict(data)
        if kw.get("aggregation_weights") is not None:
            kw["aggregation_weights"] = tuple(float(w) for w in kw["aggregation_weights"])
        for name in ("K", "T", "N", "M", "N_sa", "d", "master_seed", "max_redraws"):
            if name in kw and (isinstance(kw[name], bool) or not isinstance(kw[name], int)):
                raise ConfigError(f"{name} must be an integer, got {kw[name]!r}")
        return cls(**kw)


def validate_config(cfg: ProtocolConfig, *, attribution: bool = True) -> ProtocolConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise.

    With ``attribution=True`` the non-degenerate condition ``N < K - 1`` is
    enforced as well.
    """
    if cfg.K < 2:
        raise ConfigError(f"K must be >= 2, got {cfg.K}")
    if cfg.T < 1:
        raise ConfigError(f"T must be >= 1, got {cfg.T}")
    if cfg.M < 1:
        raise ConfigError(f"M must be >= 1, got {cfg.M}")
    if cfg.d < 1:
        raise DimensionError(f"d must be >= 1, got {cfg.d}")
    if cfg.N_sa < 1:
        raise ConfigError(f"N_sa must be >= 1, got {cfg.N_sa}")
    if not 1 <= cfg.N <= cfg.K - 1:
        raise SubsetSizeError(f"need 1 <= N <= K-1, got N={cfg.N}, K={cfg.K}")
    if attribution and cfg.N >= cfg.K - 1:
        raise SubsetSizeError(f"N={cfg.N} must be < K-1={cfg.K - 1} (exact-recovery endpoint)")
    if cfg.N < cfg.N_sa:
        raise SubsetSizeError(f"N={cfg.N} below the SA authorization threshold N_sa={cfg.N_sa}")
    if not 0.0 < cfg.participation <= 1.0:
        raise ConfigError(f"participation must lie in (0, 1], got {cfg.participation}")
    if cfg.max_redraws < 1:
        raise ConfigError("max_redraws must be positive")
    w = cfg.weights
    if w.shape != (cfg.K,):
        raise WeightSumError(f"expected {cfg.K} aggregation weights, got {w.size}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise WeightSumError("aggregation weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > _WEIGHT_TOL:
        raise WeightSumError(f"aggregation weights sum to {w.sum()!r}, not 1")
    return cfg


def as_vector(values: Any, d: int | None = None) -> np.ndarray:
    """Validate a parameter vector: 1-D, finite float64, optional length check."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"parameter vector must be 1-D, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionError(f"expected dimension {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise DimensionError("parameter vector has non-finite entries")
    return v


def aggregate(w_prev: Any, updates: Sequence[Any], weights: Any) -> np.ndarray:
    """``w_prev + sum_i p_i * Delta_i``."""
    w = as_vector(w_prev)
    p = np.asarray(weights, dtype=np.float64)
    if len(updates) != p.shape[0]:
        raise DimensionError(f"{len(updates)} updates but {p.shape[0]} weights")
    U = np.stack([as_vector(u, w.shape[0]) for u in updates]) if len(updates) else np.zeros((0, w.shape[0]))
    return w + p @ U


def participant_weights(weights: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Renormalize aggregation weights uniformly over the participating clients."""
    w = np.where(mask, weights, 0.0)
    s = w.sum()
    if s <= 0:
        raise WeightSumError("no aggregation weight on participating clients")
    return w / s
