"""Simulation configuration: schema, defaults, validation and loading.

Configs are TOML (or JSON with the same layout).  Top-level keys map onto
:class:`SimConfig` fields; ``[latency]``, ``[churn]`` and ``[adversary]``
are sub-tables.  Unknown keys are errors so typos do not silently fall back
to defaults.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


LATENCY_KINDS = ("lognormal", "uniform", "constant")
ADVERSARY_KINDS = ("sybil", "replay", "prophecy")


@dataclass(frozen=True)
class LatencyModel:
    """Per-link one-way delay in ms.

    ``lognormal`` uses ``median_ms`` and ``sigma``; ``uniform`` draws from
    ``[low_ms, high_ms]``; ``constant`` always returns ``median_ms``.
    """

    kind: str = "lognormal"
    median_ms: float = 50.0
    sigma: float = 0.5
    low_ms: float = 0.0
    high_ms: float = 0.0


@dataclass(frozen=True)
class ChurnModel:
    """Poisson join/leave processes; rates are expected events per epoch."""

    join_rate: float = 0.0
    leave_rate: float = 0.0


@dataclass(frozen=True)
class AdversaryModel:
    kind: str
    identities: int = 0          # sybil: k, replay: identities replayed
    compute_units: int = 0       # sybil: c
    speed_factor: float = 1.0    # prophecy: s
    keys_per_epoch: int = 32     # prophecy: candidate keys tried per epoch
    warmup_epochs: int = 10      # replay: honest-looking phase before the attack


@dataclass(frozen=True)
class SimConfig:
    node_count: int = 50
    omega: int = 5
    vdf_T: int = 256
    heartbeat_t: int = 64
    t_max_ms: int = 4800
    heartbeat_ms: int = 4000
    epoch_ms: int = 2000
    delay_height: int = 32
    block_tx_limit: int = 500
    modulus_bits: int = 64
    vrf_bits: int = 512
    randlen: int = 256
    duration_epochs: int = 100
    tx_rate_per_s: float = 50.0
    latency: LatencyModel = field(default_factory=LatencyModel)
    drop_prob: float = 0.0
    clock_offset_range_ms: tuple[float, float] = (-500.0, 500.0)
    clock_drift_range: tuple[float, float] = (0.0, 0.0)
    clock_tolerance_ms: int = 1000
    registration_window_ms: int = 2000
    sync_interval_ms: int = 1000
    sync_alpha: float = 0.5
    node_speed_range: tuple[float, float] = (1.0, 1.0)
    assembly_jitter_ms: int = 400
    full_nodes: Optional[int] = None
    churn: ChurnModel = field(default_factory=ChurnModel)
    adversary: Optional[AdversaryModel] = None
    clock_sample_ms: int = 1000
    node_offset_sample_ms: int = 10_000
    rng_seed: int = 1

    def __post_init__(self):
        validate(self)

    @property
    def duration_ms(self) -> int:
        return (self.duration_epochs * 2 + 1) * self.epoch_ms // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("clock_offset_range_ms", "clock_drift_range", "node_speed_range"):
            d[k] = list(d[k])
        return d


def _positive(cfg, *names):
    for name in names:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(name, f"must be positive, got {v!r}")


def validate(cfg: SimConfig) -> None:
    _positive(cfg, "node_count", "omega", "vdf_T", "heartbeat_t", "heartbeat_ms", "epoch_ms",
              "delay_height", "block_tx_limit", "randlen", "duration_epochs",
              "sync_interval_ms", "clock_sample_ms", "node_offset_sample_ms")
    for name in ("t_max_ms", "tx_rate_per_s", "clock_tolerance_ms", "registration_window_ms",
                 "assembly_jitter_ms"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            raise ConfigError(name, f"must be a non-negative number, got {v!r}")
    for name in ("modulus_bits", "vrf_bits", "rng_seed"):
        if isinstance(getattr(cfg, name), bool) or not isinstance(getattr(cfg, name), int):
            raise ConfigError(name, "must be an integer")
    if cfg.modulus_bits < 8:
        raise ConfigError("modulus_bits", "must be >= 8")
    if cfg.vrf_bits < 512 or cfg.vrf_bits % 16:
        raise ConfigError("vrf_bits", "must be a multiple of 16 and >= 512")
    if cfg.randlen > 256:
        raise ConfigError("randlen", "must be <= 256")
    if not 0 <= cfg.drop_prob < 1:
        raise ConfigError("drop_prob", "must be in [0, 1)")
    if not 0 < cfg.sync_alpha <= 1:
        raise ConfigError("sync_alpha", "must be in (0, 1]")
    lo, hi = cfg.node_speed_range
    if not 0 < lo <= hi:
        raise ConfigError("node_speed_range", "need 0 < low <= high")
    for name in ("clock_offset_range_ms", "clock_drift_range"):
        lo, hi = getattr(cfg, name)
        if lo > hi:
            raise ConfigError(name, "need low <= high")
    if cfg.full_nodes is not None and not 1 <= cfg.full_nodes <= cfg.node_count:
        raise ConfigError("full_nodes", "must be in [1, node_count]")
    lat = cfg.latency
    if lat.kind not in LATENCY_KINDS:
        raise ConfigError("latency.kind", f"unknown distribution {lat.kind!r}")
    if lat.median_ms < 0 or lat.sigma < 0 or lat.low_ms < 0 or lat.high_ms < lat.low_ms:
        raise ConfigError("latency", "parameters must be non-negative with low <= high")
    if cfg.churn.join_rate < 0 or cfg.churn.leave_rate < 0:
        raise ConfigError("churn", "rates must be non-negative")
    adv = cfg.adversary
    if adv is not None:
        if adv.kind not in ADVERSARY_KINDS:
            raise ConfigError("adversary.kind", f"unknown scenario {adv.kind!r}")
        if adv.kind == "sybil" and not (adv.identities >= 1 and adv.compute_units >= 1):
            raise ConfigError("adversary", "sybil needs identities >= 1 and compute_units >= 1")
        if adv.kind == "replay" and adv.identities < 1:
            raise ConfigError("adversary.identities", "replay needs identities >= 1")
        if adv.kind == "prophecy" and not (adv.speed_factor > 1 and adv.keys_per_epoch >= 1):
            raise ConfigError("adversary", "prophecy needs speed_factor > 1 and keys_per_epoch >= 1")


_SUBTABLES = {"latency": LatencyModel, "churn": ChurnModel, "adversary": AdversaryModel}
_PAIRS = ("clock_offset_range_ms", "clock_drift_range", "node_speed_range")


def _build(cls, data: dict, prefix: str = ""):
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(prefix + key, "unknown key")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(prefix.rstrip(".") or cls.__name__, str(exc)) from None


def config_from_dict(data: dict[str, Any]) -> SimConfig:
    data = dict(data)
    for name, cls in _SUBTABLES.items():
        if name in data and data[name] is not None:
            if not isinstance(data[name], dict):
                raise ConfigError(name, "must be a table")
            data[name] = _build(cls, data[name], name + ".")
    for name in _PAIRS:
        if name in data:
            v = data[name]
            if not (isinstance(v, (list, tuple)) and len(v) == 2):
                raise ConfigError(name, "must be a two-element list")
            data[name] = (float(v[0]), float(v[1]))
    return _build(SimConfig, data)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from None
    return config_from_dict(data)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, rng_seed=seed)
