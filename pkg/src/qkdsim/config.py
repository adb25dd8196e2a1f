"""Session configuration and its file formats.

The native format is flat ``key = value`` text with dotted section names::

    # ideal BB84
    protocol = bb84
    source.kind = single_photon
    channel.length_km = 0
    detector.efficiency = 1
    detector.dark_prob = 0
    session.pulses = 100000

Blank lines and ``#`` comments are ignored. A JSON file holding the same
keys, either flat (``{"channel.length_km": 10}``) or nested
(``{"channel": {"length_km": 10}}``), is accepted as well.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import PNS_POLICIES, STRATEGIES, EveStrategy, ProtocolKind
from .devices import (
    CoincidenceMonitor,
    Detector,
    FiberChannel,
    SinglePhotonSource,
    WatchdogMonitor,
    WeakCoherentSource,
)

SEED_ENV = "QKDSIM_SEED"
LEAKAGE_MODELS = ("individual", "shor_preskill")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "poisson"
    mu: float = 0.1
    p1: float = 1.0
    p_multi: float = 0.0


@dataclass(frozen=True)
class ChannelConfig:
    attenuation_db_per_km: float = 0.25
    length_km: float = 0.0


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 0.1
    dark_prob: float = 1e-5


@dataclass(frozen=True)
class OpticsConfig:
    visibility: float = 1.0


@dataclass(frozen=True)
class EveConfig:
    strategy: str = "none"
    omega: float = 1.0
    pns_policy: str = "rate_matched"


@dataclass(frozen=True)
class MonitorConfig:
    coincidence_factor: float = 3.0
    coincidence_window: int = 1_000_000
    coincidence_min_count: int = 5
    watchdog_tap: float = 0.9
    nominal_energy: float = 1.0e4
    watchdog_factor: float = 10.0


@dataclass(frozen=True)
class TrojanConfig:
    """Bright probe pulses sent into Bob's station (watchdog exercise)."""

    fraction: float = 0.0
    energy_factor: float = 100.0


@dataclass(frozen=True)
class SessionParams:
    pulses: int = 100_000
    sample_fraction: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class AnalysisConfig:
    ec_efficiency: float = 1.0
    leakage: str = "individual"
    qber_threshold: float = -1.0  # negative: use the leakage model's own threshold


@dataclass(frozen=True)
class SessionConfig:
    protocol: str = "bb84"
    source: SourceConfig = field(default_factory=SourceConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    eve: EveConfig = field(default_factory=EveConfig)
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    trojan: TrojanConfig = field(default_factory=TrojanConfig)
    session: SessionParams = field(default_factory=SessionParams)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    # -- building blocks -------------------------------------------------
    @property
    def protocol_kind(self) -> ProtocolKind:
        return ProtocolKind(self.protocol)

    def source_model(self):
        if self.source.kind == "poisson":
            return WeakCoherentSource(self.source.mu)
        return SinglePhotonSource(self.source.p1, self.source.p_multi)

    def channel_model(self) -> FiberChannel:
        return FiberChannel(self.channel.attenuation_db_per_km, self.channel.length_km)

    def detectors(self) -> tuple[Detector, Detector]:
        return tuple(Detector(self.detector.efficiency, self.detector.dark_prob, label)
                     for label in ("D0", "D1"))

    def eve_strategy(self) -> EveStrategy:
        return EveStrategy(self.eve.strategy, self.eve.omega, self.eve.pns_policy)

    def watchdog(self) -> WatchdogMonitor:
        return WatchdogMonitor.for_nominal(self.monitor.nominal_energy, self.monitor.watchdog_tap,
                                           self.monitor.watchdog_factor)

    def coincidence_monitor(self) -> CoincidenceMonitor:
        window = min(self.monitor.coincidence_window, self.session.pulses)
        return CoincidenceMonitor(self.monitor.coincidence_factor, window, self.detector.dark_prob,
                                  self.monitor.coincidence_min_count)

    # -- flat key access ---------------------------------------------------
    def get(self, key: str):
        section, _, name = key.partition(".")
        if not name:
            return getattr(self, section)
        return getattr(getattr(self, section), name)

    def replace(self, **flat) -> "SessionConfig":
        """Copy with dotted keys replaced, e.g. ``replace(**{"channel.length_km": 5})``."""
        return from_flat({**to_flat(self), **flat}, base=None)

    def with_value(self, key: str, value) -> "SessionConfig":
        return self.replace(**{key: value})

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in to_flat(self).items())


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def config_keys() -> dict:
    """Every accepted dotted key and its default value."""
    return to_flat(SessionConfig())


def to_flat(cfg: SessionConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for g in dataclasses.fields(value):
                out[f"{f.name}.{g.name}"] = getattr(value, g.name)
        else:
            out[f.name] = value
    return out


def _coerce(key, raw, default):
    if isinstance(default, bool):
        raise AssertionError("no boolean fields")
    try:
        if isinstance(default, int):
            if isinstance(raw, str):
                raw = raw.strip()
            x = float(raw)
            if not x.is_integer():
                raise ValueError
            return int(x)
        if isinstance(default, float):
            x = float(raw)
            if math.isnan(x):
                raise ValueError
            return x
        return str(raw).strip().lower()
    except (TypeError, ValueError):
        kind = type(default).__name__
        raise ConfigError(key, f"expected {'an' if kind == 'int' else 'a'} {kind}, got {raw!r}") from None


def from_flat(values: dict, base: SessionConfig | None = None) -> SessionConfig:
    """Build and validate a config from dotted keys; unknown keys are errors."""
    defaults = to_flat(base or SessionConfig())
    merged = dict(defaults)
    for key, raw in values.items():
        if key not in defaults:
            raise ConfigError(key, "unknown configuration key")
        merged[key] = _coerce(key, raw, defaults[key])
    sections = {}
    top = {}
    for key, value in merged.items():
        section, _, name = key.partition(".")
        if name:
            sections.setdefault(section, {})[name] = value
        else:
            top[key] = value
    kwargs = dict(top)
    for f in dataclasses.fields(SessionConfig):
        if f.name in sections:
            kwargs[f.name] = f.default_factory(**sections[f.name])
    cfg = SessionConfig(**kwargs)
    validate(cfg)
    return cfg


def _require(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def validate(cfg: SessionConfig) -> None:
    """Raise :class:`ConfigError` on the first out-of-range value."""
    _require(cfg.protocol in {p.value for p in ProtocolKind}, "protocol",
             f"expected one of {[p.value for p in ProtocolKind]}, got {cfg.protocol!r}")
    _require(cfg.source.kind in ("poisson", "single_photon"), "source.kind",
             f"expected 'poisson' or 'single_photon', got {cfg.source.kind!r}")
    _require(cfg.source.mu >= 0, "source.mu", "must be >= 0")
    _require(0 <= cfg.source.p1 <= 1, "source.p1", "must lie in [0, 1]")
    _require(0 <= cfg.source.p_multi <= 1 - cfg.source.p1 + 1e-15, "source.p_multi",
             "must lie in [0, 1 - source.p1]")
    _require(cfg.channel.attenuation_db_per_km >= 0, "channel.attenuation_db_per_km", "must be >= 0")
    _require(cfg.channel.length_km >= 0, "channel.length_km", "must be >= 0")
    _require(0 <= cfg.detector.efficiency <= 1, "detector.efficiency", "must lie in [0, 1]")
    _require(0 <= cfg.detector.dark_prob <= 1, "detector.dark_prob", "must lie in [0, 1]")
    _require(0 <= cfg.optics.visibility <= 1, "optics.visibility", "must lie in [0, 1]")
    _require(cfg.eve.strategy in STRATEGIES, "eve.strategy", f"expected one of {STRATEGIES}")
    _require(0 <= cfg.eve.omega <= 1, "eve.omega", "must lie in [0, 1]")
    _require(cfg.eve.pns_policy in PNS_POLICIES, "eve.pns_policy", f"expected one of {PNS_POLICIES}")
    _require(cfg.monitor.coincidence_factor >= 1, "monitor.coincidence_factor", "must be >= 1")
    _require(cfg.monitor.coincidence_window >= 1, "monitor.coincidence_window", "must be >= 1")
    _require(cfg.monitor.coincidence_min_count >= 1, "monitor.coincidence_min_count", "must be >= 1")
    _require(0 <= cfg.monitor.watchdog_tap <= 1, "monitor.watchdog_tap", "must lie in [0, 1]")
    _require(cfg.monitor.nominal_energy >= 0, "monitor.nominal_energy", "must be >= 0")
    _require(cfg.monitor.watchdog_factor > 0, "monitor.watchdog_factor", "must be > 0")
    _require(0 <= cfg.trojan.fraction <= 1, "trojan.fraction", "must lie in [0, 1]")
    _require(cfg.trojan.energy_factor >= 0, "trojan.energy_factor", "must be >= 0")
    _require(cfg.session.pulses >= 1, "session.pulses", "must be >= 1")
    _require(0 < cfg.session.sample_fraction < 1, "session.sample_fraction", "must lie in (0, 1)")
    _require(cfg.analysis.ec_efficiency >= 1, "analysis.ec_efficiency",
             "must be >= 1 (1 is the Shannon limit)")
    _require(cfg.analysis.leakage in LEAKAGE_MODELS, "analysis.leakage", f"expected one of {LEAKAGE_MODELS}")
    _require(cfg.analysis.qber_threshold <= 0.5, "analysis.qber_threshold", "must be <= 0.5")


def parse_text(text: str) -> dict:
    """Parse ``key = value`` lines into a flat dict (no validation)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key = key.strip()
        if key in values:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        values[key] = value.strip()
    return values


def _flatten_json(obj, prefix=""):
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten_json(v, key + "."))
        else:
            out[key] = v
    return out


def read_flat(path) -> dict:
    """Read a key-value or JSON file into a flat dict of dotted keys."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            return _flatten_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"malformed JSON: {exc}") from None
    return parse_text(text)


def load_config(path, env=None) -> SessionConfig:
    """Load a session config file; ``QKDSIM_SEED`` in ``env`` overrides the seed."""
    values = read_flat(path)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        values["session.seed"] = env[SEED_ENV]
    return from_flat(values)
