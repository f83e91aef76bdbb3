"""One simulation run: wire nodes, channel and protocol together and dispatch events."""
from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigInvalid, NoPolluterFound, NothingToServe
from ..integrity import KeyRing, is_tampered, isolate_polluter, origin_signature, tamper
from ..protocol import (
    Message, MessageKind, NodeState, expire_incoming, next_push, on_ack, on_data, on_interest,
    on_request, on_rtsb, on_rtsb_reply, on_sent, on_timeout, on_timer, update_overheard,
)
from ..rlnc import Generation, Verdict, segment, source_matrix
from ..store import FileStore
from ..strategy import make_manifest, serve_block
from .channel import Channel, Reception, Transmission
from .engine import EventQueue, substream
from .scenario import ScenarioConfig
from .topology import Topology, TopologyKind, build_corridor, build_mobile

CSV_HEADER = ("seed,strategy,topology,loss,receiver,decode_time_s,blocks_tx,"
              "innovative_ratio,bytes_tx,polluted,accused")


@dataclass
class MetricRecord:
    seed: int
    strategy: str
    topology: str
    loss: float
    receiver: int
    decode_time_s: float | None
    blocks_tx: int
    innovative_ratio: float
    bytes_tx: int
    polluted: bool
    accused: str = ""
    file_bits: int = 0

    @property
    def decoded(self) -> bool:
        return self.decode_time_s is not None

    def throughput(self) -> float:
        """File bits per second of decode time; zero for undecoded runs."""
        if self.decode_time_s is None or self.decode_time_s <= 0:
            return 0.0
        return self.file_bits / self.decode_time_s

    def csv_row(self) -> str:
        dt = "" if self.decode_time_s is None else f"{self.decode_time_s:.6f}"
        return (f"{self.seed},{self.strategy},{self.topology},{self.loss:g},{self.receiver},{dt},"
                f"{self.blocks_tx},{self.innovative_ratio:.6f},{self.bytes_tx},"
                f"{int(self.polluted)},{self.accused}")


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: list[str]
    metrics: list[MetricRecord]
    nodes: list[NodeState] = field(repr=False, default_factory=list)
    transmissions: list[Transmission] = field(repr=False, default_factory=list)
    sources: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    end_time: float = 0.0
    tampered_absorbed: int = 0

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)

    def csv_text(self, header: bool = True) -> str:
        rows = [r.csv_row() for r in self.metrics]
        return "\n".join(([CSV_HEADER] if header else []) + rows) + "\n"


@dataclass
class _Receiver:
    node: int
    wants: tuple[str, ...]
    done_at: float | None = None
    failed: bool = False
    polluted: bool = False
    accused: list[int] = field(default_factory=list)
    blocks_tx: int = 0
    bytes_tx: int = 0


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config.validate()
        cfg = self.cfg
        self.queue = EventQueue()
        self.trace: list[str] = []
        self.keyring = KeyRing(cfg.seed)
        self.topology = self._build_topology()
        jam_nodes = frozenset()
        if cfg.topology.is_corridor:
            jam_nodes = frozenset(self.topology.rows[2] + self.topology.rows[3])
        self.channel = Channel(cfg.channel(jam_nodes), self.topology, cfg.seed)
        self.jitter_rng = substream(cfg.seed, "jitter")
        self.attack_rng = substream(cfg.seed, "isolation")
        self.catalog: dict[str, Generation] = {}
        self.sources: dict[str, np.ndarray] = {}
        self.publisher_of: dict[str, int] = {}
        self.manifests: dict[str, dict[int, bytes]] = {}
        self._make_files()
        self.nodes = [self._make_node(i) for i in range(self.topology.n)]
        self.receivers = {r: _Receiver(r, tuple(sorted(self.nodes[r].own_interests)))
                          for r in self.topology.receivers}
        self.outbox: list[deque] = [deque() for _ in range(self.topology.n)]
        self.pending_try = [False] * self.topology.n
        self.first_publish: float | None = None
        self.data_tx = 0
        self.bytes_tx = 0
        self.tampered_absorbed = 0
        self.stopped = False

    # --- setup ---------------------------------------------------------------

    def _build_topology(self) -> Topology:
        cfg = self.cfg
        if cfg.topology.is_corridor:
            return build_corridor(cfg.topology, cfg.radio_range)
        return build_mobile(cfg.nodes, cfg.publishers, cfg.receivers, cfg.mobility,
                            substream(cfg.seed, "mobility"), horizon=max(cfg.horizon, 1.0))

    def _make_files(self) -> None:
        cfg = self.cfg
        content_rng = substream(cfg.seed, "content")
        for k, pub in enumerate(self.topology.publishers):
            fid = f"F{k}"
            data = content_rng.bytes(cfg.file_bytes)
            gen, vectors = segment(data, cfg.m, cfg.field, fid)
            self.catalog[fid] = gen
            self.sources[fid] = source_matrix(vectors)
            self.publisher_of[fid] = pub
            self.manifests[fid] = make_manifest(self.sources[fid])

    def _role(self, i: int) -> str:
        if i in self.topology.publishers:
            return "publisher"
        if i in self.topology.receivers:
            return "receiver"
        return "relay"

    def _make_node(self, i: int) -> NodeState:
        cfg = self.cfg
        strategy = cfg.strategy_for(i, self._role(i))
        node = NodeState(
            node_id=i, strategy=strategy, catalog=self.catalog, publishers=self.publisher_of,
            timers=cfg.timers, keyring=self.keyring, rng=substream(cfg.seed, "coding", i),
            salt=cfg.seed & 0xFFFFFFFF, bloom_bits=cfg.bloom_bits, bloom_hashes=cfg.bloom_hashes,
            handshake=cfg.handshake_enabled, promiscuous=cfg.promiscuous, attack=cfg.attack,
            manifests=self.manifests,
        )
        for fid, pub in self.publisher_of.items():
            if pub == i:
                gen = self.catalog[fid]
                origin = origin_signature(gen, i, self.keyring)
                node.files[fid] = FileStore.for_publisher(gen, self.sources[fid], strategy.coded, origin,
                                                          self.manifests[fid])
        if i in self.topology.receivers:
            node.own_interests = set(self.catalog)
        return node

    # --- tracing -------------------------------------------------------------

    def log(self, t: float, node: int | str, event: str, detail: str = "") -> None:
        if self.cfg.trace:
            self.trace.append(f"{t:.6f} {node} {event} {detail}".rstrip())

    # --- event plumbing ------------------------------------------------------

    def _jitter(self) -> float:
        return float(self.jitter_rng.uniform(0.0, self.cfg.jitter)) if self.cfg.jitter > 0 else 0.0

    def kick(self, node: int, t: float) -> None:
        if not self.pending_try[node]:
            self.pending_try[node] = True
            self.queue.push(t + self._jitter(), node, ("try",))

    def send(self, node: int, messages: list[Message], t: float) -> None:
        if messages:
            self.outbox[node].extend(messages)
            self.kick(node, t)

    def _schedule_timers(self) -> None:
        rng = substream(self.cfg.seed, "protocol")
        timers = self.cfg.timers
        kinds = [(MessageKind.INTEREST, timers.interest_period)]
        if self.cfg.handshake_enabled:
            kinds += [(MessageKind.REQUEST, timers.request_period), (MessageKind.SUMMARY, timers.summary_period)]
        for i in range(self.topology.n):
            for kind, period in kinds:
                phase = float(rng.uniform(0.0, period))
                if kind is MessageKind.INTEREST and not self.cfg.handshake_enabled and not self.nodes[i].own_interests:
                    continue
                self.queue.push(phase, i, ("timer", kind, period))

    def _schedule_mobility(self) -> None:
        for i, legs in enumerate(self.topology.legs):
            for leg in legs:
                if leg.t0 <= self.cfg.horizon:
                    self.queue.push(leg.t0, i, ("mob", leg))

    # --- main loop -----------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        if cfg.horizon > 0:
            self._schedule_timers()
            self._schedule_mobility()
        t = 0.0
        while self.queue and not self.stopped:
            nt = self.queue.peek_time()
            if nt > cfg.horizon:
                break
            t, _, node, payload = self.queue.pop()
            self._dispatch(t, node, payload)
        end = min(t, cfg.horizon) if self.stopped else cfg.horizon
        if cfg.horizon > 0:
            self.log(end, "-", "stop", "all_done" if self.stopped else "horizon")
        return RunResult(cfg, self.trace, self._metrics(), self.nodes, self.channel.log, self.sources,
                         end, self.tampered_absorbed)

    def _dispatch(self, t: float, node: int, payload: tuple) -> None:
        kind = payload[0]
        if kind == "try":
            self.pending_try[node] = False
            self._try_transmit(node, t)
        elif kind == "tx_end":
            self._tx_end(node, payload[1], t)
        elif kind == "rx":
            self._deliver(payload[1], payload[2], t)
        elif kind == "timer":
            _, mkind, period = payload
            st = self.nodes[node]
            expire_incoming(st, t)
            self.send(node, on_timer(st, mkind, t), t)
            self.queue.push(t + period, node, payload)
        elif kind == "timeout":
            self.send(node, on_timeout(self.nodes[node], t), t)
        elif kind == "process":
            self._process(node, payload[1], payload[2], t)
        elif kind == "mob":
            leg = payload[1]
            self.log(t, node, "mob", f"{leg.start[0]:.2f},{leg.start[1]:.2f}->{leg.end[0]:.2f},"
                                     f"{leg.end[1]:.2f} until={leg.t1:.3f}")

    def _try_transmit(self, node: int, t: float) -> None:
        ch = self.channel
        if not ch.idle(node, t):
            return  # tx_end will kick again
        busy = ch.medium_busy_until(node, t)
        if busy > t:
            self.pending_try[node] = True
            self.queue.push(busy + self._jitter(), node, ("try",))
            return
        msg = self.outbox[node].popleft() if self.outbox[node] else None
        if msg is None and not self.cfg.handshake_enabled:
            msg = next_push(self.nodes[node], t)
        if msg is None:
            return
        size = msg.wire_size()
        tx = ch.transmit(node, msg, size, t)
        self.bytes_tx += size
        if msg.kind is MessageKind.DATA:
            self.data_tx += 1
            if node in self.topology.publishers and self.first_publish is None:
                self.first_publish = t
        self.log(t, node, "tx", f"{msg.describe()} bytes={size}")
        self.queue.push(tx.end, node, ("tx_end", tx))
        for rec in tx.receptions:
            self.queue.push(tx.end, rec.receiver, ("rx", tx, rec))

    def _tx_end(self, node: int, tx: Transmission, t: float) -> None:
        st = self.nodes[node]
        deadline = on_sent(st, tx.message, t)
        if deadline is not None:
            self.queue.push(deadline, node, ("timeout",))
        if self.outbox[node] or not self.cfg.handshake_enabled:
            self.kick(node, t)

    def _deliver(self, tx: Transmission, rec: Reception, t: float) -> None:
        self.channel.finish(rec)
        msg = tx.message
        node = rec.receiver
        if not rec.ok:
            self.log(t, node, "drop", f"from={tx.sender} {msg.kind.value} why={rec.why}")
            return
        self.log(t, node, "rx", f"from={tx.sender} {msg.kind.value}")
        st = self.nodes[node]
        k = msg.kind
        out: list[Message] = []
        if k is MessageKind.INTEREST:
            out = on_interest(st, msg, t)
        elif k is MessageKind.REQUEST:
            out = on_request(st, msg, msg.sender, t)
        elif k is MessageKind.SUMMARY:
            update_overheard(st, msg, t)
        elif k is MessageKind.RTSB:
            if msg.target == node:
                out = [on_rtsb(st, msg, t)]
            else:
                update_overheard(st, msg, t)
        elif k is MessageKind.RTSB_REPLY:
            out = on_rtsb_reply(st, msg, t) if msg.target == node else []
            if msg.target != node:
                update_overheard(st, msg, t)
        elif k is MessageKind.ACK:
            if msg.target == node:
                out = on_ack(st, msg, t)
            else:
                update_overheard(st, msg, t)
        elif k is MessageKind.DATA:
            if self.cfg.verify_delay > 0 and self.nodes[node].strategy.signed:
                self.queue.push(t + self.cfg.verify_delay, node, ("process", msg, tx.sender))
                return
            self._process(node, msg, tx.sender, t)
            return
        self.send(node, out, t)
        if not self.cfg.handshake_enabled and k is MessageKind.INTEREST:
            self.kick(node, t)

    def _process(self, node: int, msg: Message, sender: int, t: float) -> None:
        st = self.nodes[node]
        out = on_data(st, msg, sender, t)
        self._drain_notes(node, t)
        self.send(node, out, t)
        if not self.cfg.handshake_enabled:
            self.kick(node, t)

    def _drain_notes(self, node: int, t: float) -> None:
        st = self.nodes[node]
        for note in st.notes:
            kind, f = note[0], note[1]
            if kind == "absorb":
                _, _, sender, block, verdict = note
                bad = is_tampered(block, self.sources[f])
                if bad:
                    self.tampered_absorbed += 1
                self.log(t, node, "absorb", f"{block.name} from={sender} {verdict.value} "
                                           f"rank={st.files[f].rank} tampered={int(bad)}")
            elif kind == "drop":
                _, _, sender, block = note
                self.log(t, node, "reject", f"{block.name} from={sender}")
            elif kind == "decode":
                ok = note[2]
                self.log(t, node, "decode", f"{f} ok={int(bool(ok))}")
                if not ok:
                    self._on_pollution(node, f, t)
                self._check_done(node, t)
        st.notes.clear()

    def _on_pollution(self, node: int, f: str, t: float) -> None:
        st = self.nodes[node]
        store = st.files[f]
        rec = self.receivers.get(node)
        if rec is not None:
            rec.polluted = True
        caches = sorted({s for s, _ in store.absorbed_from if s is not None})
        try:
            accused = isolate_polluter(st.blacklist, self.catalog[f], caches, self._solo_stream(f),
                                       verify=st.strategy.signed, keyring=self.keyring,
                                       manifest=None if st.strategy.coded else self.manifests[f])
            self.log(t, node, "isolate", f"{f} accused={accused}")
            if rec is not None:
                rec.accused.append(accused)
        except NoPolluterFound:
            self.log(t, node, "isolate", f"{f} accused=none")
        store.discard()

    def _solo_stream(self, f: str):
        def stream(cache: int):
            holder = self.nodes[cache]
            store = copy.deepcopy(holder.files.get(f))
            if store is None:
                return
            rng = self.attack_rng
            while True:
                try:
                    block = serve_block(store, holder.strategy, rng, cache, self.keyring)
                except NothingToServe:
                    return
                if holder.attack is not None and holder.attack.attacker == cache:
                    block = tamper(block, holder.attack, rng)
                yield block
        return stream

    def _check_done(self, node: int, t: float) -> None:
        rec = self.receivers.get(node)
        if rec is None or rec.done_at is not None or rec.failed:
            return
        st = self.nodes[node]
        stores = [st.files.get(f) for f in rec.wants]
        if any(s is not None and s.failed for s in stores):
            rec.failed = True
        elif all(s is not None and s.complete for s in stores):
            rec.done_at = t
        else:
            return
        rec.blocks_tx, rec.bytes_tx = self.data_tx, self.bytes_tx
        if all(r.done_at is not None or r.failed for r in self.receivers.values()):
            self.stopped = True

    # --- results -------------------------------------------------------------

    def _metrics(self) -> list[MetricRecord]:
        cfg = self.cfg
        out = []
        start = self.first_publish or 0.0
        for r in sorted(self.receivers):
            rec = self.receivers[r]
            st = self.nodes[r]
            received = sum(st.files[f].received for f in rec.wants if f in st.files)
            innovative = sum(st.files[f].innovative for f in rec.wants if f in st.files)
            done = rec.done_at is not None
            bits = sum(self.catalog[f].file_bits for f in rec.wants)
            out.append(MetricRecord(
                seed=cfg.seed, strategy=cfg.strategy_label, topology=cfg.topology.value, loss=cfg.loss,
                receiver=r, decode_time_s=(rec.done_at - start) if done else None,
                blocks_tx=rec.blocks_tx if (done or rec.failed) else self.data_tx,
                innovative_ratio=innovative / received if received else 0.0,
                bytes_tx=rec.bytes_tx if (done or rec.failed) else self.bytes_tx,
                polluted=rec.polluted, accused=";".join(str(a) for a in rec.accused), file_bits=bits,
            ))
        return out


def run(config: ScenarioConfig) -> RunResult:
    """Run one scenario to completion (all receivers done) or to its horizon."""
    return Simulation(config).run()
