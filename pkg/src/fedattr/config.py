"""Experiment configuration documents (JSON)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .protocol import ProtocolConfig, validate_config

BACKENDS = ("synthetic", "bigram")


@dataclass(frozen=True)
class BigramParams:
    """Language-model testbed settings."""

    vocab_size: int = 64
    teacher_scale: float = 2.0
    lr: float = 20.0
    epochs: int = 50
    docs_per_client: int = 300
    doc_len: int = 64
    n_prompts: int = 32
    gen_len: int = 64
    temperature: float = 1.0
    gamma_green: float = 0.25
    delta_boost: float = 3.0
    key_secret: int = 1234

    def validate(self) -> None:
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.lr <= 0 or self.epochs < 1:
            raise ConfigError("need lr > 0 and epochs >= 1")
        if self.docs_per_client < 1 or self.doc_len < 2:
            raise ConfigError("need docs_per_client >= 1 and doc_len >= 2")
        if self.n_prompts < 1 or self.gen_len < 1:
            raise ConfigError("need n_prompts >= 1 and gen_len >= 1")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if not 0.0 < self.gamma_green < 1.0:
            raise ConfigError("gamma_green must lie in (0, 1)")


@dataclass(frozen=True)
class SyntheticParams:
    """Gaussian update model scored by projection onto the watermark direction.

    A watermarked client's update drifts by ``wm_gain * wm_mix_ratio`` along
    the unit direction; ``d_star`` leading coordinates carry fluctuations of
    standard deviation ``sigma``.
    """

    sigma: float = 0.5
    d_star: int | None = None
    mu_scale: float = 1.0
    wm_gain: float = 16.5

    def validate(self, d: int) -> None:
        if self.sigma < 0 or self.mu_scale < 0 or self.wm_gain < 0:
            raise ConfigError("sigma, mu_scale and wm_gain must be nonnegative")
        if self.d_star is not None and not 1 <= self.d_star <= d:
            raise ConfigError(f"d_star must lie in [1, {d}]")


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: ProtocolConfig = ProtocolConfig(d=BigramParams.vocab_size ** 2)
    backend: str = "bigram"
    backend_params: Any = field(default_factory=BigramParams)
    wm_clients: tuple[int, ...] = (0, 1, 2)
    wm_mix_ratio: float = 0.20
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        expected = BigramParams if self.backend == "bigram" else SyntheticParams
        if not isinstance(self.backend_params, expected):
            raise ConfigError(f"backend_params must be {expected.__name__} for backend {self.backend!r}")
        object.__setattr__(self, "wm_clients", tuple(sorted(int(c) for c in self.wm_clients)))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        self.validate()

    def validate(self) -> None:
        cfg = self.protocol
        validate_config(cfg)
        if self.backend == "bigram":
            self.backend_params.validate()
            V = self.backend_params.vocab_size
            if cfg.d != V * V:
                raise ConfigError(f"bigram backend needs d = vocab_size^2 = {V * V}, got d={cfg.d}")
        else:
            self.backend_params.validate(cfg.d)
        if len(set(self.wm_clients)) != len(self.wm_clients):
            raise ConfigError("wm_clients has duplicates")
        if any(not 0 <= c < cfg.K for c in self.wm_clients):
            raise ConfigError(f"wm_clients must be ids in [0, {cfg.K})")
        if not 0.0 <= self.wm_mix_ratio <= 1.0:
            raise ConfigError("wm_mix_ratio must lie in [0, 1]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        n_active = int(round(cfg.participation * cfg.K))
        if n_active < 2 or cfg.N >= n_active - 1:
            raise ConfigError(
                f"participation {cfg.participation} leaves {n_active} clients per round; need N < {n_active} - 1")

    @property
    def wm_flags(self) -> tuple[bool, ...]:
        wm = set(self.wm_clients)
        return tuple(k in wm for k in range(self.protocol.K))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol.to_dict(),
            "backend": self.backend,
            "backend_params": dataclasses.asdict(self.backend_params),
            "wm_clients": list(self.wm_clients),
            "wm_mix_ratio": self.wm_mix_ratio,
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        backend = data.get("backend", "bigram")
        params_cls = {"bigram": BigramParams, "synthetic": SyntheticParams}.get(backend)
        if params_cls is None:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {backend!r}")
        params = _build(params_cls, data.get("backend_params") or {})
        proto_data = dict(data.get("protocol") or {})
        if backend == "bigram" and "d" not in proto_data:
            proto_data["d"] = params.vocab_size ** 2
        try:
            protocol = ProtocolConfig.from_dict(proto_data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        kw: dict[str, Any] = {"protocol": protocol, "backend": backend, "backend_params": params}
        for name in ("wm_clients", "seeds"):
            if name in data:
                if not isinstance(data[name], list) or any(isinstance(v, bool) or not isinstance(v, int) for v in data[name]):
                    raise ConfigError(f"{name} must be a list of integers")
                kw[name] = tuple(data[name])
        if "wm_mix_ratio" in data:
            if isinstance(data["wm_mix_ratio"], bool) or not isinstance(data["wm_mix_ratio"], (int, float)):
                raise ConfigError("wm_mix_ratio must be a number")
            kw["wm_mix_ratio"] = float(data["wm_mix_ratio"])
        if "output_dir" in data:
            kw["output_dir"] = str(data["output_dir"])
        return cls(**kw)


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment config; every failure surfaces as :class:`ConfigError`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return ExperimentConfig.from_dict(data)
