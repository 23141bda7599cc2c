"""Deterministic discrete-event simulator of an overlay network of
assemblies exchanging typed messages over heterogeneous transports.

Time is integer milliseconds and the event queue is processed in strict
(time, insertion sequence) order, so identical (topology, workload,
policy, seed) inputs yield bit-identical metrics. Random loss and latency
draws come from a per-link Mersenne Twister substream seeded by
SHA-256(seed, link key): adding links never perturbs existing draws.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import IoFailure, MissingPositions, SimulationTooLarge, ValidationFailure
from .services import haversine_m
from .transports import LatLongCoordinate

BROADCAST = "BROADCAST"

NODE_ROLES = ("MOBILE", "SERVER", "HUB")
TRANSPORT_KINDS = ("IP", "SMS", "BLUETOOTH", "PROXIMITY")


# --- topology ------------------------------------------------------------------

@dataclass(frozen=True)
class TransportModel:
    kind: str
    latency_fixed_ms: int | None = None
    latency_uniform_ms: tuple[int, int] | None = None
    loss_prob: float = 0.0
    max_payload: int | None = None


@dataclass(frozen=True)
class SimNode:
    id: str
    role: str
    position: LatLongCoordinate | None = None
    proc_delay_ms: int = 0


@dataclass(frozen=True)
class SimLink:
    a: str
    b: str
    transport: TransportModel

    def key(self) -> str:
        return "~".join(sorted((self.a, self.b)))

    def other_end(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


@dataclass(frozen=True)
class TopologySpec:
    nodes: list[SimNode]
    links: list[SimLink]

    def node(self, node_id: str) -> SimNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ValidationFailure(f"unknown node {node_id!r}")

    def links_of(self, node_id: str) -> list[SimLink]:
        return [l for l in self.links if node_id in (l.a, l.b)]


def _parse_transport(obj: dict) -> TransportModel:
    kind = obj.get("kind", "IP")
    if kind not in TRANSPORT_KINDS:
        raise ValidationFailure(f"unknown transport kind {kind!r}")
    latency = obj.get("latency", {"fixed": 0})
    fixed = uniform = None
    if "fixed" in latency:
        fixed = int(latency["fixed"])
        if fixed < 0:
            raise ValidationFailure("fixed latency must be >= 0")
    elif "uniform" in latency:
        lo, hi = (int(v) for v in latency["uniform"])
        if not 0 <= lo <= hi:
            raise ValidationFailure(f"uniform latency bounds [{lo}, {hi}] invalid")
        uniform = (lo, hi)
    else:
        raise ValidationFailure(f"latency must be {{'fixed': f}} or {{'uniform': [lo, hi]}}, got {latency!r}")
    loss = float(obj.get("loss", 0.0))
    if not 0.0 <= loss <= 1.0:
        raise ValidationFailure(f"loss_prob {loss} outside [0, 1]")
    max_payload = obj.get("max_payload")
    if max_payload is not None:
        max_payload = int(max_payload)
        if max_payload <= 0:
            raise ValidationFailure("max_payload must be positive")
    return TransportModel(kind, fixed, uniform, loss, max_payload)


def _topology_from_dict_raw(doc: dict) -> TopologySpec:
    if not isinstance(doc, dict):
        raise ValidationFailure("topology must be an object")
    if not isinstance(doc.get("nodes", []), list) or not isinstance(doc.get("links", []), list):
        raise ValidationFailure("topology nodes/links must be lists")
    nodes = []
    seen_ids: set[str] = set()
    for obj in doc.get("nodes", []):
        if not isinstance(obj, dict):
            raise ValidationFailure("each node must be an object")
        node_id = str(obj["id"])
        if node_id in seen_ids:
            raise ValidationFailure(f"duplicate node id {node_id!r}")
        seen_ids.add(node_id)
        role = obj.get("role", "HUB")
        if role not in NODE_ROLES:
            raise ValidationFailure(f"unknown role {role!r} for node {node_id}")
        position = None
        if "lat" in obj or "lon" in obj:
            if "lat" not in obj or "lon" not in obj:
                raise ValidationFailure(f"node {node_id}: lat and lon must come together")
            position = LatLongCoordinate(float(obj["lat"]), float(obj["lon"]))
        proc = int(obj.get("proc_delay_ms", 0))
        if proc < 0:
            raise ValidationFailure(f"node {node_id}: proc_delay_ms must be >= 0")
        nodes.append(SimNode(node_id, role, position, proc))
    links = []
    seen_pairs: set[str] = set()
    for obj in doc.get("links", []):
        if not isinstance(obj, dict):
            raise ValidationFailure("each link must be an object")
        a, b = str(obj.get("a")), str(obj.get("b"))
        if a == b:
            raise ValidationFailure(f"self-link on {a!r}")
        for end in (a, b):
            if end not in seen_ids:
                raise ValidationFailure(f"link endpoint {end!r} is not a node")
        link = SimLink(a, b, _parse_transport(obj))
        if link.key() in seen_pairs:
            raise ValidationFailure(f"duplicate link {link.key()!r}")
        seen_pairs.add(link.key())
        links.append(link)
    if not nodes:
        raise ValidationFailure("topology has no nodes")
    return TopologySpec(nodes=nodes, links=links)


def _validated(fn, *args):
    try:
        return fn(*args)
    except ValidationFailure:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationFailure(str(exc)) from exc


def topology_from_dict(doc: dict) -> TopologySpec:
    return _validated(_topology_from_dict_raw, doc)


def workload_from_list(items: Iterable[dict]) -> list[SimMessage]:
    return _validated(_workload_from_list_raw, items)


def load_topology(path: str | Path) -> TopologySpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read topology {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"{path}: {exc}") from exc
    return topology_from_dict(doc)


# --- workload -------------------------------------------------------------------

@dataclass(frozen=True)
class SimMessage:
    msg_id: str
    origin: str
    destination: str  # node id or BROADCAST
    msg_type: str = "message"
    payload_size: int = 0
    inject_ms: int = 0


def _workload_from_list_raw(items: Iterable[dict]) -> list[SimMessage]:
    if not isinstance(items, (list, tuple)):
        raise ValidationFailure("workload must be a list")
    out = []
    seen: set[str] = set()
    for obj in items:
        if not isinstance(obj, dict):
            raise ValidationFailure("each workload entry must be an object")
        msg = SimMessage(
            msg_id=str(obj["msg_id"]),
            origin=str(obj["origin"]),
            destination=str(obj.get("destination", BROADCAST)),
            msg_type=str(obj.get("type", "message")),
            payload_size=int(obj.get("size", 0)),
            inject_ms=int(obj.get("inject_ms", 0)),
        )
        if msg.msg_id in seen:
            raise ValidationFailure(f"duplicate msg_id {msg.msg_id!r}")
        seen.add(msg.msg_id)
        if msg.payload_size < 0:
            raise ValidationFailure(f"{msg.msg_id}: size must be >= 0")
        if msg.inject_ms < 0:
            raise ValidationFailure(f"{msg.msg_id}: inject_ms must be >= 0")
        out.append(msg)
    return out


def load_workload(path: str | Path) -> list[SimMessage]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read workload {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"{path}: {exc}") from exc
    if not isinstance(doc, list):
        raise ValidationFailure("workload must be a JSON list")
    return workload_from_list(doc)


# --- metrics -------------------------------------------------------------------------

@dataclass(frozen=True)
class DeliveryRecord:
    msg_id: str
    node: str
    latency_ms: int
    hops: int


@dataclass
class SimMetrics:
    injected: int = 0
    transmissions: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    duplicates_suppressed: int = 0
    dropped_dead_end: int = 0
    dropped_oversize: int = 0
    delivery_ratio: float = 0.0
    latency_ms: list[int] = field(default_factory=list)
    hop_counts: list[int] = field(default_factory=list)
    deliveries: list[DeliveryRecord] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def emit_metrics(metrics: SimMetrics, fmt: str = "json") -> str:
    """Deterministic serialization: full JSON, or CSV with one detail row
    per delivery plus a trailing summary row."""
    if fmt == "json":
        return json.dumps(metrics.as_dict(), sort_keys=True, indent=2)
    if fmt == "csv":
        lines = ["msg_id,latency_ms,hops"]
        for rec in metrics.deliveries:
            lines.append(f"{rec.msg_id},{rec.latency_ms},{rec.hops}")
        lines.append(
            "summary"
            f",delivered={metrics.delivered}"
            f",transmissions={metrics.transmissions}"
            f",dropped_loss={metrics.dropped_loss}"
            f",duplicates_suppressed={metrics.duplicates_suppressed}"
            f",dropped_dead_end={metrics.dropped_dead_end}"
            f",dropped_oversize={metrics.dropped_oversize}"
            f",delivery_ratio={metrics.delivery_ratio:.6f}"
        )
        return "\n".join(lines) + "\n"
    raise ValidationFailure(f"unknown metrics format {fmt!r}")


# --- routing policies ----------------------------------------------------------------

@dataclass
class MessageCopy:
    message: SimMessage
    ttl_remaining: int
    hops: int


@dataclass(frozen=True)
class ForwardDecision:
    links: tuple[SimLink, ...]
    dead_end: bool = False


class RoutingPolicy:
    name = "policy"
    initial_ttl = 0

    def prepare(self, spec: TopologySpec, workload: list[SimMessage]) -> None:
        pass

    def forward(self, spec: TopologySpec, node_id: str, copy: MessageCopy,
                arrival_link: SimLink | None) -> ForwardDecision:
        raise NotImplementedError


class FloodPolicy(RoutingPolicy):
    """Forward first receipts on every link except the arrival link while
    hop budget remains; repeat receipts are suppressed upstream."""

    name = "flood"

    def __init__(self, ttl: int):
        if ttl < 1:
            raise ValidationFailure("flood ttl must be >= 1")
        self.initial_ttl = ttl

    def forward(self, spec: TopologySpec, node_id: str, copy: MessageCopy,
                arrival_link: SimLink | None) -> ForwardDecision:
        if copy.ttl_remaining <= 0:
            return ForwardDecision(links=())
        links = tuple(l for l in spec.links_of(node_id) if l is not arrival_link)
        return ForwardDecision(links=links)


class GeoGreedyPolicy(RoutingPolicy):
    """Forward to the single neighbor strictly closer to the destination;
    a node with no closer neighbor is a dead end."""

    name = "geo"
    initial_ttl = 0  # unused: paths strictly shrink the distance

    def prepare(self, spec: TopologySpec, workload: list[SimMessage]) -> None:
        missing = [n.id for n in spec.nodes if n.position is None]
        if missing:
            raise MissingPositions(f"geo policy requires positions; missing on {missing}")
        for msg in workload:
            if msg.destination == BROADCAST:
                raise ValidationFailure("geo policy does not route BROADCAST messages")

    def forward(self, spec: TopologySpec, node_id: str, copy: MessageCopy,
                arrival_link: SimLink | None) -> ForwardDecision:
        dest = copy.message.destination
        if node_id == dest:
            return ForwardDecision(links=())
        dest_pos = spec.node(dest).position
        here = spec.node(node_id).position
        assert dest_pos is not None and here is not None
        own_distance = haversine_m(here, dest_pos)
        best: tuple[float, str, SimLink] | None = None
        for link in spec.links_of(node_id):
            neighbor = link.other_end(node_id)
            pos = spec.node(neighbor).position
            assert pos is not None
            d = haversine_m(pos, dest_pos)
            if d < own_distance and (best is None or (d, neighbor) < (best[0], best[1])):
                best = (d, neighbor, link)
        if best is None:
            return ForwardDecision(links=(), dead_end=True)
        return ForwardDecision(links=(best[2],))


def flood_policy(ttl: int) -> FloodPolicy:
    return FloodPolicy(ttl)


def geo_greedy_policy() -> GeoGreedyPolicy:
    return GeoGreedyPolicy()


# --- engine -----------------------------------------------------------------------

class SimEventKind(enum.Enum):
    INJECT = "INJECT"
    ARRIVE = "ARRIVE"
    DROP = "DROP"


@dataclass(frozen=True)
class SimEvent:
    time: int
    seq: int
    kind: SimEventKind
    node: str
    copy: MessageCopy
    link: SimLink | None = None


class Simulator:
    def __init__(
        self,
        spec: TopologySpec,
        workload: list[SimMessage],
        policy: RoutingPolicy,
        seed: int,
        horizon_ms: int | None = None,
        max_events: int | None = None,
    ):
        for msg in workload:
            spec.node(msg.origin)
            if msg.destination != BROADCAST:
                spec.node(msg.destination)
            if horizon_ms is not None and msg.inject_ms > horizon_ms:
                raise ValidationFailure(f"{msg.msg_id}: inject_ms beyond horizon")
        policy.prepare(spec, workload)
        self.spec = spec
        self.workload = workload
        self.policy = policy
        self.seed = seed
        self.horizon_ms = horizon_ms
        self.max_events = max_events
        self.metrics = SimMetrics()
        self.trace: list[tuple[int, int, str]] = []  # (time, seq, kind)
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self._seen: set[tuple[str, str]] = set()
        self._unicast_delivered: set[str] = set()
        self._link_rngs: dict[str, random.Random] = {}

    # -- internals

    def _rng_for(self, link: SimLink) -> random.Random:
        key = link.key()
        rng = self._link_rngs.get(key)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}|{key}".encode("utf-8")).digest()
            rng = random.Random(int.from_bytes(digest[:16], "big"))
            self._link_rngs[key] = rng
        return rng

    def _schedule(self, time_ms: int, kind: SimEventKind, node: str, copy: MessageCopy,
                  link: SimLink | None = None) -> None:
        self._seq += 1
        event = SimEvent(time_ms, self._seq, kind, node, copy, link)
        heapq.heappush(self._heap, (time_ms, self._seq, event))

    def _transmit(self, from_node: str, link: SimLink, copy: MessageCopy, at_ms: int) -> None:
        transport = link.transport
        if transport.max_payload is not None and copy.message.payload_size > transport.max_payload:
            self.metrics.dropped_oversize += 1
            return
        self.metrics.transmissions += 1
        rng = self._rng_for(link)
        lost = rng.random() < transport.loss_prob
        if transport.latency_uniform_ms is not None:
            lo, hi = transport.latency_uniform_ms
            latency = round(rng.uniform(lo, hi))
        else:
            latency = transport.latency_fixed_ms or 0
        kind = SimEventKind.DROP if lost else SimEventKind.ARRIVE
        self._schedule(at_ms + latency, kind, link.other_end(from_node), copy, link)

    def _record_delivery(self, node: str, copy: MessageCopy, now_ms: int) -> None:
        latency = now_ms - copy.message.inject_ms
        self.metrics.delivered += 1
        self.metrics.latency_ms.append(latency)
        self.metrics.hop_counts.append(copy.hops)
        self.metrics.deliveries.append(DeliveryRecord(copy.message.msg_id, node, latency, copy.hops))
        if copy.message.destination != BROADCAST:
            self._unicast_delivered.add(copy.message.msg_id)

    def _handle(self, event: SimEvent) -> None:
        node, copy, now = event.node, event.copy, event.time
        msg = copy.message
        key = (node, msg.msg_id)
        if event.kind is SimEventKind.ARRIVE and key in self._seen:
            self.metrics.duplicates_suppressed += 1
            return
        self._seen.add(key)
        if event.kind is SimEventKind.ARRIVE:
            if msg.destination == BROADCAST or msg.destination == node:
                self._record_delivery(node, copy, now)
        else:  # INJECT at the origin
            if msg.destination == node:
                self._record_delivery(node, copy, now)
                return
        decision = self.policy.forward(self.spec, node, copy, event.link)
        if decision.dead_end:
            self.metrics.dropped_dead_end += 1
            return
        if not decision.links:
            return
        send_at = now + self.spec.node(node).proc_delay_ms
        onward = MessageCopy(message=msg, ttl_remaining=copy.ttl_remaining - 1, hops=copy.hops + 1)
        for link in decision.links:
            self._transmit(node, link, onward, send_at)

    # -- run

    def run(self) -> SimMetrics:
        for msg in self.workload:
            self.metrics.injected += 1
            copy = MessageCopy(message=msg, ttl_remaining=self.policy.initial_ttl, hops=0)
            self._schedule(msg.inject_ms, SimEventKind.INJECT, msg.origin, copy)
        processed = 0
        while self._heap:
            time_ms, _seq, event = self._heap[0]
            if self.horizon_ms is not None and time_ms > self.horizon_ms:
                break
            heapq.heappop(self._heap)
            processed += 1
            if self.max_events is not None and processed > self.max_events:
                raise SimulationTooLarge(f"exceeded {self.max_events} events")
            self.trace.append((event.time, event.seq, event.kind.value))
            if event.kind is SimEventKind.DROP:
                self.metrics.dropped_loss += 1
                continue
            self._handle(event)
        unicast_injected = sum(1 for m in self.workload if m.destination != BROADCAST)
        if unicast_injected:
            self.metrics.delivery_ratio = len(self._unicast_delivered) / unicast_injected
        return self.metrics


def run(
    spec: TopologySpec,
    workload: list[SimMessage],
    policy: RoutingPolicy,
    seed: int,
    horizon_ms: int | None = None,
    max_events: int | None = None,
) -> SimMetrics:
    """One deterministic simulation; same inputs and seed, same metrics."""
    return Simulator(spec, workload, policy, seed, horizon_ms, max_events).run()
