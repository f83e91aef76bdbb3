"""Discrete-event simulation of broadcast dissemination."""
from .channel import ChannelModel, CollisionMode, JamWindow
from .engine import EventQueue, substream
from .run import CSV_HEADER, MetricRecord, RunResult, Simulation, run
from .scenario import ScenarioConfig, dump_config, load_config, parse_config
from .topology import MobilityParams, Topology, TopologyKind, build_corridor, build_mobile

__all__ = [
    "CSV_HEADER", "ChannelModel", "CollisionMode", "EventQueue", "JamWindow", "MetricRecord",
    "MobilityParams", "RunResult", "ScenarioConfig", "Simulation", "Topology", "TopologyKind",
    "build_corridor", "build_mobile", "dump_config", "load_config", "parse_config", "run", "substream",
]
