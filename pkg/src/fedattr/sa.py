"""Functional secure-aggregation oracle.

The vault holds one round's updates and answers only subset-sum queries over
authorized subsets. There is deliberately no accessor for an individual
update; ground truth for verification travels through separate code paths.
"""
from __future__ import annotations

import threading
from typing import Iterable, Sequence

import numpy as np

from .errors import AuthorizationError, DimensionError, UnknownClient
from .protocol import ProtocolConfig


class RoundVault:
    """Write-once store of the round's ``K`` updates behind a subset-sum interface."""

    __slots__ = ("round", "n_sa", "_updates", "_count", "_lock", "_clients")

    def __init__(self, round_: int, updates: Sequence[np.ndarray] | np.ndarray, n_sa: int,
                 clients: Iterable[int] | None = None):
        U = np.array(updates, dtype=np.float64, copy=True)
        if U.ndim != 2:
            raise DimensionError("updates must be a (K, d) array")
        if not np.all(np.isfinite(U)):
            raise DimensionError("updates must be finite")
        U.setflags(write=False)
        self.round = int(round_)
        self.n_sa = int(n_sa)
        self._updates = U
        # ids of the submitting clients; row r holds client self._clients[r]
        ids = list(range(U.shape[0])) if clients is None else [int(c) for c in clients]
        if len(ids) != U.shape[0] or len(set(ids)) != len(ids):
            raise DimensionError("client ids must be unique and match the update rows")
        self._clients = {c: r for r, c in enumerate(ids)}
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    @property
    def clients(self) -> list[int]:
        return list(self._clients)

    @property
    def dim(self) -> int:
        return self._updates.shape[1]

    def subset_sum(self, W: Iterable[int]) -> np.ndarray:
        """``sum_{j in W} Delta_j``; requires ``|W| >= n_sa``."""
        ids = list(W)
        if len(set(ids)) != len(ids):
            raise AuthorizationError("query subset contains repeated clients")
        if len(ids) < self.n_sa:
            raise AuthorizationError(f"|W|={len(ids)} below the SA threshold {self.n_sa}")
        try:
            rows = [self._clients[int(c)] for c in ids]
        except KeyError as exc:
            raise UnknownClient(f"client {exc.args[0]} did not submit an update this round") from None
        out = self._updates[rows].sum(axis=0)
        with self._lock:
            self._count += 1
        return out

    def __repr__(self) -> str:
        return f"RoundVault(round={self.round}, clients={len(self._clients)}, n_sa={self.n_sa}, queries={self._count})"


def subset_sum(vault: RoundVault, W: Iterable[int]) -> np.ndarray:
    return vault.subset_sum(W)


def query_budget(cfg: ProtocolConfig) -> int:
    """Nominal SA query count of a full-participation attribution run: ``2 M K T``."""
    return 2 * cfg.M * cfg.K * cfg.T
