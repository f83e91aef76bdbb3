"""CB-MANET node behaviour: beacons, the RTSB handshake, breadcrumbs, overhearing.

Handlers take a :class:`NodeState` plus the incoming message and return the
messages the node wants to broadcast. The simulator owns time, the channel
and the outbox; nodes never see each other's state directly.

Two data-plane modes exist. With the handshake enabled every block goes
through RTSB -> RTSB-Reply -> Data -> Ack. With it disabled (pure broadcast)
nodes push blocks whenever they hold forwarding credit or can mint fresh
blocks; see :func:`next_push`.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NothingToServe
from .integrity import DEFAULT_KEYRING, AttackConfig, Blacklist, KeyRing, signer_of, tamper
from .naming import DEFAULT_BITS, DEFAULT_HASHES, BloomFilter, CacheSummaryView, ContentName, summarize_cache
from .rlnc import CodedBlock, Generation, PlainBlock, Verdict
from .store import FileStore
from .strategy import ReceiveVerdict, ServePolicy, Strategy, StrategyKind, on_receive_verify, serve_block

INTEREST_TTL = 3
CONTROL_HEADER = 12  # kind, sender, ttl/target, sequence
ACK_BYTES = 4


class MessageKind(enum.Enum):
    INTEREST = "interest"
    REQUEST = "request"
    SUMMARY = "summary"
    RTSB = "rtsb"
    RTSB_REPLY = "rtsb_reply"
    DATA = "data"
    ACK = "ack"


class RejectCode(enum.IntEnum):
    BLOCK_ALREADY_RECEIVED = 1
    FILE_ALREADY_RECEIVED = 2
    BEING_SENT_BY_OTHER = 3


@dataclass(eq=False)
class Message:
    kind: MessageKind
    sender: int
    filter: BloomFilter | None = None
    ttl: int = 0
    summary: CacheSummaryView | None = None
    name: str | None = None
    file: str | None = None
    target: int | None = None
    accept: bool | None = None
    code: RejectCode | None = None
    block: CodedBlock | PlainBlock | None = None
    broadcast: bool = True

    def wire_size(self) -> int:
        k = self.kind
        if k in (MessageKind.INTEREST, MessageKind.REQUEST):
            return CONTROL_HEADER + self.filter.wire_size()
        if k is MessageKind.SUMMARY:
            return CONTROL_HEADER + self.summary.wire_size()
        if k is MessageKind.DATA:
            return CONTROL_HEADER + self.block.wire_size()
        name = len(self.name.encode()) if self.name else 0
        return CONTROL_HEADER + name + (1 if k is MessageKind.RTSB_REPLY else 0)

    def describe(self) -> str:
        k = self.kind
        if k in (MessageKind.INTEREST, MessageKind.REQUEST):
            return f"{k.value} bits={self.filter.popcount()} ttl={self.ttl}"
        if k is MessageKind.SUMMARY:
            ranks = ",".join(f"{f}:{r}" for f, r in sorted(self.summary.ranks.items()))
            return f"summary ranks={ranks or '-'}"
        if k is MessageKind.RTSB:
            return f"rtsb {self.name} to={self.target}"
        if k is MessageKind.RTSB_REPLY:
            verdict = "accept" if self.accept else f"reject{int(self.code)}"
            return f"rtsb_reply {self.name} to={self.target} {verdict}"
        if k is MessageKind.DATA:
            to = "*" if self.target is None else self.target
            return f"data {self.block.name} to={to} signer={signer_of(self.block)}"
        return f"ack {self.name} to={self.target}"


def Interest(sender: int, flt: BloomFilter, ttl: int = INTEREST_TTL) -> Message:
    return Message(MessageKind.INTEREST, sender, filter=flt, ttl=ttl)


def Request(sender: int, flt: BloomFilter) -> Message:
    return Message(MessageKind.REQUEST, sender, filter=flt)


def Summary(sender: int, view: CacheSummaryView) -> Message:
    return Message(MessageKind.SUMMARY, sender, summary=view)


def Rtsb(sender: int, name: str, file: str, target: int) -> Message:
    return Message(MessageKind.RTSB, sender, name=name, file=file, target=target)


def RtsbReply(sender: int, name: str, file: str, target: int, code: RejectCode | None = None) -> Message:
    return Message(MessageKind.RTSB_REPLY, sender, name=name, file=file, target=target,
                   accept=code is None, code=code)


def Data(sender: int, block, target: int | None = None) -> Message:
    return Message(MessageKind.DATA, sender, block=block, name=block.name, file=block.gen.file_id, target=target)


def Ack(sender: int, name: str, file: str, target: int) -> Message:
    return Message(MessageKind.ACK, sender, name=name, file=file, target=target)


@dataclass(frozen=True)
class ProtocolTimers:
    interest_period: float = 1.0
    request_period: float = 1.0
    summary_period: float = 2.0
    handshake_timeout: float = 0.5

    def __post_init__(self) -> None:
        for name in ("interest_period", "request_period", "summary_period", "handshake_timeout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class Phase(enum.Enum):
    WAIT_REPLY = "wait_reply"
    WAIT_ACK = "wait_ack"


@dataclass
class Handshake:
    name: str
    file: str
    peer: int
    block: object = None
    phase: Phase = Phase.WAIT_REPLY
    deadline: float = float("inf")
    resends: int = 0
    outgoing: bool = True


@dataclass
class NodeState:
    node_id: int
    strategy: Strategy
    catalog: Mapping[str, Generation]
    publishers: Mapping[str, int]
    timers: ProtocolTimers = field(default_factory=ProtocolTimers)
    keyring: KeyRing = DEFAULT_KEYRING
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    salt: int = 0
    bloom_bits: int = DEFAULT_BITS
    bloom_hashes: int = DEFAULT_HASHES
    handshake: bool = True
    promiscuous: bool = True
    relay_interests: bool = True
    attack: AttackConfig | None = None
    manifests: Mapping[str, Mapping[int, bytes]] = field(default_factory=dict)

    files: dict[str, FileStore] = field(default_factory=dict)
    own_interests: set[str] = field(default_factory=set)
    heard_interests: dict[str, tuple[int, float]] = field(default_factory=dict)
    relayed: dict[tuple[int, int], float] = field(default_factory=dict)
    heard_requests: dict[int, tuple[BloomFilter, float]] = field(default_factory=dict)
    neighbor_summaries: dict[int, CacheSummaryView] = field(default_factory=dict)
    possession: dict[int, set[str]] = field(default_factory=dict)
    complete_facts: dict[int, set[str]] = field(default_factory=dict)
    rank_facts: dict[tuple[int, str], int] = field(default_factory=dict)
    outgoing: Handshake | None = None
    incoming: dict[str, Handshake] = field(default_factory=dict)
    offers: deque = field(default_factory=deque)
    breadcrumbs: dict[str, set[int]] = field(default_factory=dict)
    blacklist: Blacklist = field(default_factory=Blacklist)
    credits: dict[str, deque] = field(default_factory=dict)
    interest_from: dict[str, dict[int, tuple[int, float]]] = field(default_factory=dict)
    recent: dict[str, deque] = field(default_factory=dict)
    forwarded: dict[str, set] = field(default_factory=dict)
    push_cursor: int = 0
    plain_cursor: dict[str, int] = field(default_factory=dict)
    notes: list[tuple] = field(default_factory=list)

    def store(self, file: str) -> FileStore:
        s = self.files.get(file)
        if s is None:
            s = self.files[file] = FileStore(self.catalog[file], self.strategy.coded, self.manifests.get(file))
        return s

    def wants(self, file: str) -> bool:
        if file not in self.own_interests and not (self.relay_interests and file in self.heard_interests):
            return False
        s = self.files.get(file)
        return s is None or s.wanted

    def empty_filter(self) -> BloomFilter:
        return BloomFilter(self.bloom_bits, self.bloom_hashes, self.salt)

    def publisher_of(self, file: str) -> int | None:
        return self.publishers.get(file)

    # what this node believes about a neighbour

    def peer_has(self, peer: int, name: str) -> bool:
        if name in self.possession.get(peer, ()):
            return True
        view = self.neighbor_summaries.get(peer)
        return view is not None and view.has_block(name)

    def peer_complete(self, peer: int, file: str) -> bool:
        if file in self.complete_facts.get(peer, ()):
            return True
        view = self.neighbor_summaries.get(peer)
        return view is not None and view.has_file(file)

    def peer_rank(self, peer: int, file: str) -> int:
        view = self.neighbor_summaries.get(peer)
        base = view.rank(file) if view is not None else 0
        return max(base, self.rank_facts.get((peer, file), 0))


def summarize(node: NodeState, clock: float) -> CacheSummaryView:
    return summarize_cache(node, clock)


# --- beacons -----------------------------------------------------------------


def on_timer(node: NodeState, kind: MessageKind, clock: float) -> list[Message]:
    if kind is MessageKind.INTEREST:
        flt = node.empty_filter().insert_all(ContentName(f) for f in sorted(node.own_interests)
                                              if node.store(f).wanted)
        prune_interests(node, clock)
        out = [Interest(node.node_id, flt, INTEREST_TTL)]
        # heard interests not yet relayed this period
        by_ttl: dict[int, list[str]] = {}
        for f, (ttl, _) in sorted(node.heard_interests.items()):
            if ttl >= 2 and f not in node.own_interests:
                by_ttl.setdefault(ttl - 1, []).append(f)
        for ttl, names in sorted(by_ttl.items(), reverse=True):
            relay = node.empty_filter().insert_all(ContentName(f) for f in names)
            if _mark_relayed(node, relay, ttl, clock):
                out.append(Interest(node.node_id, relay, ttl))
        return out
    if kind is MessageKind.REQUEST:
        names = [f for f in sorted(node.catalog) if node.wants(f) and _someone_serves(node, f, clock)]
        if not names:
            return []
        return [Request(node.node_id, node.empty_filter().insert_all(ContentName(f) for f in names))]
    if kind is MessageKind.SUMMARY:
        return [Summary(node.node_id, summarize(node, clock))]
    raise ValueError(f"no timer for {kind}")


def _mark_relayed(node: NodeState, flt: BloomFilter, ttl: int, clock: float) -> bool:
    key = (flt.bits, ttl)
    last = node.relayed.get(key)
    if last is not None and clock - last < node.timers.interest_period:
        return False
    node.relayed[key] = clock
    return True


def _someone_serves(node: NodeState, file: str, clock: float) -> bool:
    horizon = 3 * node.timers.summary_period
    mine = node.files[file].rank if file in node.files else 0
    for peer, view in node.neighbor_summaries.items():
        if clock - view.as_of > horizon:
            continue
        if view.has_file(file) or view.rank(file) > mine:
            return True
    return False


def on_interest(node: NodeState, msg: Message, clock: float) -> list[Message]:
    """Record breadcrumbs; relay immediately the first time a filter is heard in a period."""
    heard = []
    period = node.timers.interest_period
    for f in sorted(node.catalog):
        if msg.filter.contains(ContentName(f)):
            heard.append(f)
            node.breadcrumbs.setdefault(f, set()).add(msg.sender)
            seen = node.interest_from.setdefault(f, {})
            old = seen.get(msg.sender)
            if old is None or msg.ttl >= old[0] or clock - old[1] > period:
                seen[msg.sender] = (msg.ttl, clock)
            prev = node.heard_interests.get(f)
            if prev is None or clock - prev[1] > period or msg.ttl > prev[0]:
                node.heard_interests[f] = (msg.ttl, clock)
    if not node.handshake and msg.ttl >= 2:
        relay_names = [f for f in heard if f not in node.own_interests]
        if relay_names:
            relay = node.empty_filter().insert_all(ContentName(f) for f in relay_names)
            if _mark_relayed(node, relay, msg.ttl - 1, clock):
                return [Interest(node.node_id, relay, msg.ttl - 1)]
    return []


# --- handshake ---------------------------------------------------------------


def on_request(node: NodeState, request: Message, requester: int, clock: float) -> list[Message]:
    node.heard_requests[requester] = (request.filter, clock)
    for f in sorted(node.catalog):
        if request.filter.contains(ContentName(f)):
            node.breadcrumbs.setdefault(f, set()).add(requester)
            if f in node.files and node.files[f].rank > 0:
                _queue_offer(node, f, requester)
    return start_next_offer(node, clock)


def _queue_offer(node: NodeState, file: str, target: int) -> None:
    if (file, target) in node.offers:
        return
    if node.outgoing is not None and node.outgoing.file == file and node.outgoing.peer == target:
        return
    node.offers.append((file, target))


def _can_serve_to(node: NodeState, store: FileStore, target: int) -> bool:
    f = store.gen.file_id
    if target == node.node_id or node.peer_complete(target, f):
        return False
    if store.rank == 0:
        return False
    policy = node.strategy.policy(store)
    if policy in (ServePolicy.ORIGINATE, ServePolicy.RECODE_SIGNED):
        return True
    if policy is ServePolicy.RECODE:
        return store.complete or store.rank > node.peer_rank(target, f)
    return True


def start_next_offer(node: NodeState, clock: float) -> list[Message]:
    """Begin the next queued handshake if none is in progress."""
    if node.outgoing is not None:
        return []
    while node.offers:
        f, target = node.offers.popleft()
        store = node.files.get(f)
        if store is None or not _can_serve_to(node, store, target):
            continue
        try:
            block = serve_block(store, node.strategy, node.rng, node.node_id, node.keyring,
                                skip=lambda name, t=target: node.peer_has(t, name))
        except NothingToServe:
            continue
        block = _maybe_tamper(node, block)
        node.outgoing = Handshake(block.name, f, target, block)
        return [Rtsb(node.node_id, block.name, f, target)]
    return []


def _maybe_tamper(node: NodeState, block):
    if node.attack is not None and node.attack.attacker == node.node_id:
        return tamper(block, node.attack, node.rng)
    return block


def on_rtsb(node: NodeState, rtsb: Message, clock: float) -> Message:
    """Target side of the handshake: accept, or reject with the first applicable code."""
    f = rtsb.file
    store = node.files.get(f)
    code = None
    if store is not None and store.holds(rtsb.name):
        code = RejectCode.BLOCK_ALREADY_RECEIVED
    elif not node.wants(f) or (store is not None and store.full):
        code = RejectCode.FILE_ALREADY_RECEIVED
    else:
        busy = node.incoming.get(rtsb.name)
        if busy is not None and busy.peer != rtsb.sender and busy.deadline > clock:
            code = RejectCode.BEING_SENT_BY_OTHER
    if code is None:
        node.incoming[rtsb.name] = Handshake(rtsb.name, f, rtsb.sender, phase=Phase.WAIT_ACK,
                                             deadline=clock + 2 * node.timers.handshake_timeout, outgoing=False)
    return RtsbReply(node.node_id, rtsb.name, f, rtsb.sender, code)


def on_rtsb_reply(node: NodeState, reply: Message, clock: float) -> list[Message]:
    hs = node.outgoing
    if hs is None or hs.name != reply.name or hs.peer != reply.sender or hs.phase is not Phase.WAIT_REPLY:
        return []
    if reply.accept:
        hs.phase = Phase.WAIT_ACK
        hs.deadline = float("inf")
        return [Data(node.node_id, hs.block, hs.peer)]
    if reply.code is RejectCode.BLOCK_ALREADY_RECEIVED:
        node.possession.setdefault(reply.sender, set()).add(reply.name)
    elif reply.code is RejectCode.FILE_ALREADY_RECEIVED:
        node.complete_facts.setdefault(reply.sender, set()).add(reply.file)
    node.outgoing = None
    return start_next_offer(node, clock)


def on_ack(node: NodeState, ack: Message, clock: float) -> list[Message]:
    hs = node.outgoing
    node.possession.setdefault(ack.sender, set()).add(ack.name)
    if hs is None or hs.name != ack.name or hs.peer != ack.sender:
        return []
    key = (ack.sender, ack.file)
    node.rank_facts[key] = max(node.rank_facts.get(key, 0), node.peer_rank(ack.sender, ack.file)) + 1
    node.outgoing = None
    heard = node.heard_requests.get(ack.sender)
    if heard is not None and clock - heard[1] <= 2 * node.timers.request_period \
            and heard[0].contains(ContentName(ack.file)):
        _queue_offer(node, ack.file, ack.sender)
    return start_next_offer(node, clock)


def on_sent(node: NodeState, msg: Message, clock: float) -> float | None:
    """Called when a handshake message leaves the radio; returns a deadline to watch."""
    hs = node.outgoing
    if hs is None or msg.target != hs.peer or msg.name != hs.name:
        return None
    if msg.kind in (MessageKind.RTSB, MessageKind.DATA):
        hs.deadline = clock + node.timers.handshake_timeout
        return hs.deadline
    return None


def on_timeout(node: NodeState, clock: float) -> list[Message]:
    hs = node.outgoing
    if hs is None or hs.deadline > clock + 1e-12:
        return []
    if hs.phase is Phase.WAIT_ACK and hs.resends == 0:
        hs.resends += 1
        hs.deadline = float("inf")
        return [Data(node.node_id, hs.block, hs.peer)]
    node.outgoing = None
    return start_next_offer(node, clock)


def expire_incoming(node: NodeState, clock: float) -> None:
    for name in [n for n, hs in node.incoming.items() if hs.deadline <= clock]:
        del node.incoming[name]


# --- data plane --------------------------------------------------------------


def receive_block(node: NodeState, block, sender: int, clock: float, *, addressed: bool) -> Verdict | None:
    """Verify and absorb a block; returns the verdict, or None when dropped/ignored.

    In pure-broadcast mode a verified block heard from upstream also earns one
    forwarding credit: verbatim forwarders take every distinct block, mixers
    only blocks that were innovative here.
    """
    f = block.gen.file_id
    if not addressed and not node.promiscuous:
        return None
    store = node.files.get(f)
    if not node.handshake:
        prune_interests(node, clock)
    relaying = not node.handshake and sender_is_upstream(node, f, sender) and bool(downstream(node, f))
    # holders keep listening even once complete: overheard copies cancel pending forwards
    holding = store is not None and store.rank > 0
    if not (node.wants(f) or holding or relaying):
        return None
    store = node.store(f)
    if store.failed:
        return None
    publisher = node.publisher_of(f)
    verdict = on_receive_verify(store, block, node.strategy, sender, node.blacklist, node.keyring, publisher)
    if verdict is ReceiveVerdict.DROP:
        node.notes.append(("drop", f, sender, block))
        return None
    pending = node.credits.get(f)
    if not relaying and store.coded:
        node.forwarded.setdefault(f, set()).add(block.name)
    if pending and not relaying:
        # a neighbour already forwarded this very block: ours would be a duplicate
        kept = [b for b in pending if b.name != block.name]
        if len(kept) != len(pending):
            node.credits[f] = deque(kept)
    result = None
    if store.wanted:
        result = store.accept(block, sender)
        node.notes.append(("absorb", f, sender, block, result))
        checks = f in node.own_interests or node.strategy.kind is not StrategyKind.UNRESTRICTED
        if result is Verdict.INNOVATIVE and store.full and checks:
            # unrestricted relays mix without ever decoding: only subscribers check digests
            ok = store.try_complete(node.keyring)
            node.notes.append(("decode", f, ok))
    if relaying and not store.failed and not node.strategy.is_seed(store):
        if node.strategy.policy(store) is ServePolicy.RECODE and result is not Verdict.INNOVATIVE:
            return result  # a mixer only has something new to say after learning something new
        # coded names are unique, raw block names recur every publisher cycle
        if store.coded:
            recent = node.forwarded.setdefault(f, set())
            fresh = block.name not in recent
            recent.add(block.name)
        else:
            recent = node.recent.setdefault(f, deque(maxlen=max(store.gen.m - 1, 1)))
            fresh = block.name not in recent
            if fresh:
                recent.append(block.name)
        if fresh:
            node.credits.setdefault(f, deque()).append(block)
    return result


INTEREST_MEMORY = 3  # interest periods a heard interest stays valid


def prune_interests(node: NodeState, clock: float) -> None:
    """Forget interests not refreshed recently (neighbours move away or finish)."""
    limit = INTEREST_MEMORY * node.timers.interest_period
    for f, seen in node.interest_from.items():
        for peer in [p for p, (_, t) in seen.items() if clock - t > limit]:
            del seen[peer]


def own_ttl(node: NodeState, file: str) -> int:
    """Hop budget this node's interest relay carries for ``file`` (its distance from the requester)."""
    if file in node.own_interests:
        return INTEREST_TTL
    return max((ttl for ttl, _ in node.interest_from.get(file, {}).values()), default=0) - 1


def downstream(node: NodeState, file: str) -> list[int]:
    """Neighbours closer to a requester than we are, plus requesters heard directly."""
    mine = own_ttl(node, file)
    return sorted(p for p, (ttl, _) in node.interest_from.get(file, {}).items()
                  if ttl > mine or ttl == INTEREST_TTL)


def sender_is_upstream(node: NodeState, file: str, sender: int) -> bool:
    entry = node.interest_from.get(file, {}).get(sender)
    return entry is None or entry[0] < own_ttl(node, file)


def on_data(node: NodeState, data: Message, sender: int, clock: float) -> list[Message]:
    addressed = data.target == node.node_id
    if data.target is not None and not addressed:
        update_overheard(node, data, clock)
    verdict = receive_block(node, data.block, sender, clock, addressed=addressed or data.target is None)
    if not addressed:
        return []
    out: list[Message] = []
    node.incoming.pop(data.name, None)
    if verdict is not None or node.files.get(data.file) is not None:
        out.append(Ack(node.node_id, data.name, data.file, sender))
    if verdict is Verdict.INNOVATIVE:
        for peer in sorted(node.breadcrumbs.get(data.file, ())):
            if peer != sender and peer != node.node_id and not node.peer_complete(peer, data.file):
                _queue_offer(node, data.file, peer)
        out.extend(start_next_offer(node, clock))
    return out


def update_overheard(node: NodeState, msg: Message, clock: float) -> None:
    k = msg.kind
    if k is MessageKind.SUMMARY:
        node.neighbor_summaries[msg.sender] = msg.summary
        node.possession.pop(msg.sender, None)
        for f, r in msg.summary.ranks.items():
            key = (msg.sender, f)
            if node.rank_facts.get(key, 0) < r:
                node.rank_facts[key] = r
    elif k is MessageKind.ACK:
        node.possession.setdefault(msg.sender, set()).add(msg.name)
    elif k is MessageKind.RTSB_REPLY and not msg.accept:
        if msg.code is RejectCode.BLOCK_ALREADY_RECEIVED:
            node.possession.setdefault(msg.sender, set()).add(msg.name)
        elif msg.code is RejectCode.FILE_ALREADY_RECEIVED:
            node.complete_facts.setdefault(msg.sender, set()).add(msg.file)
    elif k is MessageKind.DATA:
        node.possession.setdefault(msg.sender, set()).add(msg.name)
        if msg.target is not None:
            node.possession.setdefault(msg.target, set()).add(msg.name)
    # drop queued offers the overheard traffic made pointless
    if node.offers and k in (MessageKind.ACK, MessageKind.DATA, MessageKind.SUMMARY, MessageKind.RTSB_REPLY):
        node.offers = deque((f, t) for f, t in node.offers if not node.peer_complete(t, f))


# --- pure-broadcast mode -----------------------------------------------------


def next_push(node: NodeState, clock: float) -> Message | None:
    """Next block to push when the handshake is disabled.

    A node only pushes files some downstream neighbour asked for. Seeds
    (publisher, or any holder allowed to mint fresh blocks) push continuously;
    others spend one credit per verified block heard from upstream.
    """
    prune_interests(node, clock)
    files = [f for f in sorted(node.files) if downstream(node, f)]
    if not files:
        return None
    n = len(files)
    for i in range(n):
        f = files[(node.push_cursor + i) % n]
        store = node.files[f]
        if store.rank == 0:
            continue
        block = _push_block(node, store)
        if block is not None:
            node.push_cursor = (node.push_cursor + i + 1) % n
            return Data(node.node_id, _maybe_tamper(node, block))
    return None


def _push_block(node: NodeState, store: FileStore):
    f = store.gen.file_id
    strategy = node.strategy
    if strategy.is_seed(store):
        cursor = None
        if store.publisher and not strategy.coded:
            cursor = node.plain_cursor.get(f, 0)
            node.plain_cursor[f] = cursor + 1
        return serve_block(store, strategy, node.rng, node.node_id, node.keyring, plain_cursor=cursor)
    queue = node.credits.get(f)
    if not queue:
        return None
    received = queue.popleft()
    if strategy.policy(store) is ServePolicy.RECODE:
        return serve_block(store, strategy, node.rng, node.node_id, node.keyring)
    store.sent[received.name] += 1
    return received
