"""Broadcast radio channel: range, per-link loss, optional shared-slot collisions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import SenderBusy
from .engine import substream
from .topology import Topology


class CollisionMode(enum.Enum):
    OFF = "off"
    SHARED_SLOT = "shared_slot"


@dataclass(frozen=True)
class JamWindow:
    start: float
    end: float
    loss: float
    nodes: frozenset[int] = frozenset()


@dataclass(frozen=True)
class ChannelModel:
    radio_range: float = 70.0
    loss: float = 0.0
    bitrate: float = 1e6
    collision: CollisionMode = CollisionMode.OFF
    jam: JamWindow | None = None

    def airtime(self, size_bytes: int) -> float:
        return size_bytes * 8.0 / self.bitrate

    def loss_at(self, receiver: int, t: float) -> float:
        j = self.jam
        if j is not None and j.start <= t < j.end and (not j.nodes or receiver in j.nodes):
            return max(self.loss, j.loss)
        return self.loss


@dataclass
class Reception:
    tx_id: int
    sender: int
    receiver: int
    start: float
    end: float
    ok: bool = True
    why: str = ""


@dataclass
class Transmission:
    tx_id: int
    sender: int
    start: float
    end: float
    message: object
    receptions: list[Reception] = field(default_factory=list)


class Channel:
    """Runtime channel state for one run.

    Loss fate of the k-th transmission on link (s, r) comes from a per-link
    substream, so runs that transmit different amounts still see identical
    loss sequences on each link.
    """

    def __init__(self, model: ChannelModel, topology: Topology, seed: int):
        self.model = model
        self.topology = topology
        self.seed = seed
        self._links: dict[tuple[int, int], np.random.Generator] = {}
        self.busy_until = [0.0] * topology.n
        self.active: list[list[Reception]] = [[] for _ in range(topology.n)]
        self._next_id = 0
        self.log: list[Transmission] = []

    def _link(self, s: int, r: int) -> np.random.Generator:
        g = self._links.get((s, r))
        if g is None:
            g = self._links[(s, r)] = substream(self.seed, "loss", s, r)
        return g

    def idle(self, node: int, t: float) -> bool:
        return self.busy_until[node] <= t

    def medium_busy_until(self, node: int, t: float) -> float:
        """Latest end of any in-range transmission currently on the air (carrier sense)."""
        if self.model.collision is CollisionMode.OFF:
            return t
        latest = t
        for rec in self.active[node]:
            if rec.start <= t < rec.end:
                latest = max(latest, rec.end)
        return latest

    def transmit(self, sender: int, message, size_bytes: int, t: float) -> Transmission:
        if self.busy_until[sender] > t:
            raise SenderBusy(f"node {sender} is still transmitting until {self.busy_until[sender]}")
        end = t + self.model.airtime(size_bytes)
        tx = Transmission(self._next_id, sender, t, end, message)
        self._next_id += 1
        self.busy_until[sender] = end
        shared = self.model.collision is CollisionMode.SHARED_SLOT
        if shared:
            # half duplex: whatever the sender was receiving is lost
            for rec in self.active[sender]:
                if rec.end > t and rec.ok:
                    rec.ok, rec.why = False, "half_duplex"
        adj = self.topology.adjacency(t, self.model.radio_range)[sender]
        for r in np.flatnonzero(adj).tolist():
            u = self._link(sender, r).random()
            rec = Reception(tx.tx_id, sender, r, t, end)
            if u < self.model.loss_at(r, t):
                rec.ok, rec.why = False, "loss"
            if shared:
                if self.busy_until[r] > t:
                    if rec.ok:
                        rec.ok, rec.why = False, "half_duplex"
                for other in self.active[r]:
                    if other.end > t:
                        if other.ok:
                            other.ok, other.why = False, "collision"
                        if rec.ok:
                            rec.ok, rec.why = False, "collision"
            self.active[r].append(rec)
            tx.receptions.append(rec)
        self.log.append(tx)
        return tx

    def finish(self, rec: Reception) -> None:
        lst = self.active[rec.receiver]
        lst.remove(rec)
