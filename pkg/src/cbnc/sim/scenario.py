"""Scenario configuration and its flat ``key = value`` file format.

Example::

    # corridor, 30% loss, full-cache coding everywhere
    topology = corridor_disjoint
    strategy = fullcache
    loss = 0.3
    seed = 7
    m = 16
    block_size = 1024

Per-role strategies use ``strategy.publisher``, ``strategy.relay`` and
``strategy.receiver``; a single node can be pinned with ``strategy.node.<id>``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..errors import ConfigInvalid
from ..field import GF256, FieldSpec
from ..integrity import AttackConfig, AttackMode
from ..protocol import ProtocolTimers
from ..strategy import Strategy, StrategyKind
from .channel import ChannelModel, CollisionMode, JamWindow
from .topology import MobilityParams, TopologyKind


@dataclass
class ScenarioConfig:
    topology: TopologyKind = TopologyKind.CORRIDOR_DISJOINT
    field: FieldSpec = GF256
    strategy: StrategyKind = StrategyKind.FULL_CACHE
    role_strategies: dict[str, StrategyKind] = dataclasses.field(default_factory=dict)
    node_strategies: dict[int, StrategyKind] = dataclasses.field(default_factory=dict)
    accumulation_threshold: int = 2
    loss: float = 0.0
    seed: int = 1
    m: int = 16
    block_size: int = 1024
    file_size: int | None = None
    horizon: float = 60.0
    attacker_node: int | None = None
    attack_mode: AttackMode = AttackMode.CORRUPT_PAYLOAD
    attack_rate: float = 1.0
    interest_period: float = 1.0
    request_period: float = 1.0
    summary_period: float = 2.0
    handshake_timeout: float = 0.5
    handshake: bool = False
    collision: CollisionMode | None = None
    promiscuous: bool = True
    radio_range: float = 70.0
    bitrate: float = 1e6
    jitter: float = 1e-3
    verify_delay: float = 0.0
    jam_start: float | None = None
    jam_end: float | None = None
    jam_loss: float | None = None
    nodes: int = 10
    publishers: int = 3
    receivers: int = 7
    area: float = 300.0
    speed_min: float = 1.0
    speed_max: float = 5.0
    pause: float = 2.0
    bloom_bits: int = 1024
    bloom_hashes: int = 4
    trace: bool = True

    # derived views

    @property
    def file_bytes(self) -> int:
        return self.file_size if self.file_size is not None else self.m * self.block_size

    @property
    def handshake_enabled(self) -> bool:
        return self.handshake

    @property
    def collision_mode(self) -> CollisionMode:
        if self.collision is not None:
            return self.collision
        if self.topology is TopologyKind.CORRIDOR_DISJOINT:
            return CollisionMode.OFF
        return CollisionMode.SHARED_SLOT

    @property
    def timers(self) -> ProtocolTimers:
        return ProtocolTimers(self.interest_period, self.request_period, self.summary_period,
                              self.handshake_timeout)

    @property
    def attack(self) -> AttackConfig | None:
        if self.attacker_node is None:
            return None
        return AttackConfig(self.attacker_node, self.attack_mode, self.attack_rate)

    @property
    def mobility(self) -> MobilityParams:
        return MobilityParams(self.area, self.area, self.speed_min, self.speed_max, self.pause)

    def channel(self, jam_nodes: frozenset[int] = frozenset()) -> ChannelModel:
        jam = None
        if self.jam_start is not None:
            jam = JamWindow(self.jam_start, self.jam_end, self.jam_loss, jam_nodes)
        return ChannelModel(self.radio_range, self.loss, self.bitrate, self.collision_mode, jam)

    def strategy_for(self, node: int, role: str) -> Strategy:
        kind = self.node_strategies.get(node) or self.role_strategies.get(role) or self.strategy
        return Strategy(kind, self.accumulation_threshold)

    @property
    def strategy_label(self) -> str:
        if not self.role_strategies and not self.node_strategies:
            return self.strategy.value
        parts = [self.strategy.value] + [f"{r}={k.value}" for r, k in sorted(self.role_strategies.items())]
        return "+".join(parts)

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    # validation

    def validate(self) -> ScenarioConfig:
        errors: dict[str, str] = {}
        if not 0.0 <= self.loss <= 1.0:
            errors["loss"] = "must lie in [0, 1]"
        if self.m < 1:
            errors["m"] = "must be >= 1"
        if self.block_size < 1:
            errors["block_size"] = "must be >= 1"
        if self.file_size is not None and self.file_size < 1:
            errors["file_size"] = "must be >= 1"
        if self.horizon < 0:
            errors["horizon"] = "must be >= 0"
        if self.accumulation_threshold < 2:
            errors["accumulation_threshold"] = "must be >= 2"
        if not 0.0 <= self.attack_rate <= 1.0:
            errors["attack_rate"] = "must lie in [0, 1]"
        for name in ("interest_period", "request_period", "summary_period", "handshake_timeout",
                     "radio_range", "bitrate"):
            if getattr(self, name) <= 0:
                errors[name] = "must be positive"
        if self.jitter < 0 or self.verify_delay < 0:
            errors["jitter" if self.jitter < 0 else "verify_delay"] = "must be >= 0"
        jam = (self.jam_start, self.jam_end, self.jam_loss)
        if any(v is not None for v in jam):
            if any(v is None for v in jam):
                errors["jam"] = "jam_start, jam_end and jam_loss must be given together"
            elif not (self.jam_start <= self.jam_end and 0.0 <= self.jam_loss <= 1.0):
                errors["jam"] = "need jam_start <= jam_end and jam_loss in [0, 1]"
        n = 8 if self.topology.is_corridor else self.nodes
        if not self.topology.is_corridor:
            if self.nodes != self.publishers + self.receivers:
                errors["nodes"] = "must equal publishers + receivers"
            if self.publishers < 1 or self.receivers < 1:
                errors["publishers"] = "need at least one publisher and one receiver"
            if self.speed_min < 0 or self.speed_max < self.speed_min:
                errors["speed_min"] = "need 0 <= speed_min <= speed_max"
            if self.area <= 0:
                errors["area"] = "must be positive"
        if self.attacker_node is not None and not 0 <= self.attacker_node < n:
            errors["attacker_node"] = f"no node {self.attacker_node} in a {n}-node scenario"
        for node in self.node_strategies:
            if not 0 <= node < n:
                errors[f"strategy.node.{node}"] = "unknown node"
        for role in self.role_strategies:
            if role not in ("publisher", "relay", "receiver"):
                errors[f"strategy.{role}"] = "role must be publisher, relay or receiver"
        if self.bloom_bits <= 0 or self.bloom_bits % 8 or self.bloom_hashes < 1:
            errors["bloom_bits"] = "bloom_bits must be a positive multiple of 8 and bloom_hashes >= 1"
        if errors:
            raise ConfigInvalid(errors)
        return self


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}

_SCALARS: dict[str, Any] = {
    "loss": float, "seed": int, "m": int, "block_size": int, "file_size": int, "horizon": float,
    "attacker_node": int, "attack_rate": float, "interest_period": float, "request_period": float,
    "summary_period": float, "handshake_timeout": float, "radio_range": float, "bitrate": float,
    "jitter": float, "verify_delay": float, "jam_start": float, "jam_end": float, "jam_loss": float,
    "nodes": int, "publishers": int, "receivers": int, "area": float, "speed_min": float,
    "speed_max": float, "pause": float, "bloom_bits": int, "bloom_hashes": int,
    "accumulation_threshold": int,
}


def _topology(text: str) -> TopologyKind:
    aliases = {"disjoint": "corridor_disjoint", "interfering": "corridor_interfering",
               "random_waypoint": "mobile", "mobility": "mobile"}
    return TopologyKind(aliases.get(text, text))


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    cfg = dataclasses.replace(base) if base is not None else ScenarioConfig()
    cfg.role_strategies = dict(cfg.role_strategies)
    cfg.node_strategies = dict(cfg.node_strategies)
    errors: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {lineno}"] = f"expected key = value, got {line!r}"
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        try:
            _apply(cfg, key, value)
        except (ValueError, KeyError) as exc:
            errors[key] = str(exc) or "invalid value"
    if errors:
        raise ConfigInvalid(errors)
    return cfg.validate()


def _apply(cfg: ScenarioConfig, key: str, value: str) -> None:
    low = value.lower()
    if key in _SCALARS:
        setattr(cfg, key, None if low in ("none", "") else _SCALARS[key](value))
    elif key == "topology":
        cfg.topology = _topology(low)
    elif key == "field":
        cfg.field = FieldSpec.parse(low)
    elif key == "strategy":
        cfg.strategy = StrategyKind.parse(low)
    elif key.startswith("strategy.node."):
        cfg.node_strategies[int(key.rsplit(".", 1)[1])] = StrategyKind.parse(low)
    elif key.startswith("strategy."):
        cfg.role_strategies[key.split(".", 1)[1]] = StrategyKind.parse(low)
    elif key == "attack_mode":
        cfg.attack_mode = AttackMode(low)
    elif key in ("handshake", "promiscuous", "trace"):
        setattr(cfg, key, _BOOL[low])
    elif key == "collision":
        cfg.collision = None if low == "auto" else CollisionMode(low)
    else:
        raise KeyError(f"unknown key {key!r}")


def load_config(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    return parse_config(Path(path).read_text(), base)


def dump_config(cfg: ScenarioConfig) -> str:
    """Render ``cfg`` in the flat file format (round-trips through :func:`parse_config`)."""
    lines = [f"topology = {cfg.topology.value}", f"field = {cfg.field}", f"strategy = {cfg.strategy.value}"]
    for role, kind in sorted(cfg.role_strategies.items()):
        lines.append(f"strategy.{role} = {kind.value}")
    for node, kind in sorted(cfg.node_strategies.items()):
        lines.append(f"strategy.node.{node} = {kind.value}")
    for key in _SCALARS:
        v = getattr(cfg, key)
        if v is not None:
            lines.append(f"{key} = {v}")
    lines.append(f"attack_mode = {cfg.attack_mode.value}")
    lines.append(f"handshake = {str(cfg.handshake).lower()}")
    lines.append(f"collision = {'auto' if cfg.collision is None else cfg.collision.value}")
    lines.append(f"promiscuous = {str(cfg.promiscuous).lower()}")
    lines.append(f"trace = {str(cfg.trace).lower()}")
    return "\n".join(lines) + "\n"
