"""Typed component-pipeline kernel.

Components expose plugs (receive from upstream) and sockets (accept
downstream registrations), each typed TEXT or RECORD. Connections run
socket -> plug, must match kinds, and may not form cycles. Event delivery
is synchronous and depth-first on the emitter's flow of control, fanning
out in registration order; an assembly is serialized by one re-entrant
lock so external transports can inject events safely.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import (
    AmbiguousPorts,
    AssemblyNotEditable,
    CodecFailure,
    CycleWouldForm,
    DuplicateComponentId,
    InvalidStateTransition,
    KindMismatch,
    NotRunning,
    PortUnavailable,
    UnknownCodec,
    UnknownComponent,
)

log = logging.getLogger(__name__)


class EventKind(enum.Enum):
    TEXT = "TEXT"
    RECORD = "RECORD"


class PortDirection(enum.Enum):
    PLUG = "PLUG"
    SOCKET = "SOCKET"


class AssemblyState(enum.Enum):
    CREATED = "CREATED"
    RUNNING = "RUNNING"
    STOPPED = "STOPPED"


class Event:
    """Base of the two event kinds flowing through pipelines."""

    kind: EventKind
    payload: Any


@dataclass(frozen=True)
class TextEvent(Event):
    payload: str
    kind: EventKind = field(default=EventKind.TEXT, init=False)


@dataclass(frozen=True)
class RecordEvent(Event):
    payload: Any
    kind: EventKind = field(default=EventKind.RECORD, init=False)


@dataclass(frozen=True)
class Port:
    component_id: str
    direction: PortDirection
    kind: EventKind


@dataclass(frozen=True)
class Connection:
    from_port: Port  # SOCKET side (upstream)
    to_port: Port  # PLUG side (downstream)


# --- codecs -------------------------------------------------------------------

@dataclass(frozen=True)
class Codec:
    name: str
    encode: Callable[[Any], str]
    decode: Callable[[str], Any]


_codecs: dict[str, Codec] = {}

DEFAULT_CODEC = "location_xml"


def register_codec(name: str, encode: Callable[[Any], str], decode: Callable[[str], Any]) -> None:
    _codecs[name] = Codec(name, encode, decode)


def get_codec(name: str) -> Codec:
    try:
        return _codecs[name]
    except KeyError:
        raise UnknownCodec(name) from None


class AdaptDirection(enum.Enum):
    RECORD_TO_TEXT = "RECORD_TO_TEXT"
    TEXT_TO_RECORD = "TEXT_TO_RECORD"


def adapt(event: Event, direction: AdaptDirection, codec: str = DEFAULT_CODEC) -> Event:
    """Convert an event to the opposite kind through a registered codec.

    Round trip through opposite directions reproduces an equal payload.
    """
    c = get_codec(codec)
    if direction is AdaptDirection.RECORD_TO_TEXT:
        if event.kind is not EventKind.RECORD:
            raise KindMismatch("RECORD_TO_TEXT requires a RECORD event")
        try:
            return TextEvent(c.encode(event.payload))
        except CodecFailure:
            raise
        except Exception as exc:
            raise CodecFailure(f"codec {codec!r} failed to encode: {exc}") from exc
    if event.kind is not EventKind.TEXT:
        raise KindMismatch("TEXT_TO_RECORD requires a TEXT event")
    try:
        return RecordEvent(c.decode(event.payload))
    except CodecFailure:
        raise
    except Exception as exc:
        raise CodecFailure(f"codec {codec!r} failed to decode: {exc}") from exc


# --- components ------------------------------------------------------------------

class Component:
    """A pipeline component with at most one plug and one socket per kind.

    Subclasses declare ``plug_kinds`` / ``socket_kinds`` and implement
    ``handle_text`` / ``handle_record`` for their plugs. Source components
    override ``on_start`` / ``on_stop``.
    """

    catalog_kind = "component"
    plug_kinds: frozenset[EventKind] = frozenset()
    socket_kinds: frozenset[EventKind] = frozenset()

    def __init__(self, component_id: str, params: dict[str, Any] | None = None):
        self.component_id = component_id
        self.params = dict(params or {})
        self.assembly: Assembly | None = None

    # -- ports

    def ports(self) -> list[Port]:
        out = [Port(self.component_id, PortDirection.PLUG, k) for k in sorted(self.plug_kinds, key=lambda k: k.value)]
        out += [Port(self.component_id, PortDirection.SOCKET, k) for k in sorted(self.socket_kinds, key=lambda k: k.value)]
        return out

    def plug(self, kind: EventKind) -> Port:
        if kind not in self.plug_kinds:
            raise PortUnavailable(f"{self.component_id} has no {kind.value} plug")
        return Port(self.component_id, PortDirection.PLUG, kind)

    def socket(self, kind: EventKind) -> Port:
        if kind not in self.socket_kinds:
            raise PortUnavailable(f"{self.component_id} has no {kind.value} socket")
        return Port(self.component_id, PortDirection.SOCKET, kind)

    # -- event flow

    def receive(self, event: Event) -> None:
        if event.kind is EventKind.TEXT:
            self.handle_text(event)
        else:
            self.handle_record(event)

    def handle_text(self, event: Event) -> None:
        raise NotImplementedError(f"{self.component_id} does not accept TEXT events")

    def handle_record(self, event: Event) -> None:
        raise NotImplementedError(f"{self.component_id} does not accept RECORD events")

    def emit(self, event: Event) -> None:
        if self.assembly is None:
            raise UnknownComponent(f"{self.component_id} is not part of an assembly")
        self.assembly.emit(self, event)

    # -- lifecycle hooks

    def on_start(self) -> None:
        pass

    def on_stop(self) -> None:
        pass


class EventBus(Component):
    """Fan-out component: each RECORD event goes to every registrant once."""

    catalog_kind = "event_bus"
    plug_kinds = frozenset({EventKind.RECORD})
    socket_kinds = frozenset({EventKind.RECORD})

    def handle_record(self, event: Event) -> None:
        self.emit(event)


class CodecAdapter(Component):
    """Adapter crossing the TEXT/RECORD boundary through a named codec."""

    catalog_kind = "xml_codec_adapter"

    def __init__(self, component_id: str, direction: AdaptDirection, codec: str = DEFAULT_CODEC):
        super().__init__(component_id, {"direction": direction.value, "codec": codec})
        self.direction = direction
        self.codec_name = codec
        get_codec(codec)  # fail fast on unknown codec
        if direction is AdaptDirection.RECORD_TO_TEXT:
            self.plug_kinds = frozenset({EventKind.RECORD})
            self.socket_kinds = frozenset({EventKind.TEXT})
        else:
            self.plug_kinds = frozenset({EventKind.TEXT})
            self.socket_kinds = frozenset({EventKind.RECORD})

    def handle_text(self, event: Event) -> None:
        self.emit(adapt(event, self.direction, self.codec_name))

    def handle_record(self, event: Event) -> None:
        self.emit(adapt(event, self.direction, self.codec_name))


# --- assembly ------------------------------------------------------------------------

class Assembly:
    """A runnable pipeline of components on one node."""

    def __init__(self, assembly_id: str):
        self.assembly_id = assembly_id
        self.components: dict[str, Component] = {}
        self.connections: list[Connection] = []
        self.state = AssemblyState.CREATED
        self.diagnostics: list[str] = []
        self._lock = threading.RLock()
        self._observers: list[Callable[[str, Event], None]] = []

    # -- construction

    def add(self, component: Component) -> Component:
        if self.state is not AssemblyState.CREATED:
            raise AssemblyNotEditable(f"assembly {self.assembly_id} is {self.state.value}")
        if component.component_id in self.components:
            raise DuplicateComponentId(component.component_id)
        if component.assembly is not None:
            raise ValueError(f"{component.component_id} already belongs to an assembly")
        component.assembly = self
        self.components[component.component_id] = component
        return component

    def connect(self, from_port: Port, to_port: Port) -> Connection:
        """Register the downstream plug with the upstream socket."""
        if self.state is not AssemblyState.CREATED:
            raise AssemblyNotEditable(f"assembly {self.assembly_id} is {self.state.value}")
        if from_port.direction is not PortDirection.SOCKET or to_port.direction is not PortDirection.PLUG:
            raise ValueError("connections run socket -> plug")
        for port in (from_port, to_port):
            comp = self.components.get(port.component_id)
            if comp is None:
                raise UnknownComponent(port.component_id)
            declared = comp.socket_kinds if port.direction is PortDirection.SOCKET else comp.plug_kinds
            if port.kind not in declared:
                raise PortUnavailable(f"{port.component_id} has no {port.kind.value} {port.direction.value.lower()}")
        if from_port.kind is not to_port.kind:
            raise KindMismatch(f"{from_port.kind.value} socket cannot feed {to_port.kind.value} plug")
        if self._reaches(to_port.component_id, from_port.component_id):
            raise CycleWouldForm(f"{from_port.component_id} -> {to_port.component_id}")
        conn = Connection(from_port, to_port)
        self.connections.append(conn)
        return conn

    def connect_components(self, upstream_id: str, downstream_id: str) -> Connection:
        """Connect two components, inferring the unique compatible kind."""
        up = self.components.get(upstream_id)
        down = self.components.get(downstream_id)
        if up is None:
            raise UnknownComponent(upstream_id)
        if down is None:
            raise UnknownComponent(downstream_id)
        kinds = up.socket_kinds & down.plug_kinds
        if not kinds:
            raise KindMismatch(
                f"no compatible kind between {upstream_id} (sockets "
                f"{sorted(k.value for k in up.socket_kinds)}) and {downstream_id} (plugs "
                f"{sorted(k.value for k in down.plug_kinds)})"
            )
        if len(kinds) > 1:
            raise AmbiguousPorts(f"{upstream_id} and {downstream_id} are compatible on both kinds")
        kind = next(iter(kinds))
        return self.connect(up.socket(kind), down.plug(kind))

    def _reaches(self, start: str, target: str) -> bool:
        """DFS over connection edges: is `target` reachable from `start`?"""
        if start == target:
            return True
        stack, seen = [start], {start}
        while stack:
            node = stack.pop()
            for conn in self.connections:
                if conn.from_port.component_id == node:
                    nxt = conn.to_port.component_id
                    if nxt == target:
                        return True
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
        return False

    def has_cycle(self) -> bool:
        """Full DFS cycle check, used by invariant tests after connects."""
        WHITE, GREY, BLACK = 0, 1, 2
        color = {cid: WHITE for cid in self.components}
        adj: dict[str, list[str]] = {cid: [] for cid in self.components}
        for conn in self.connections:
            adj[conn.from_port.component_id].append(conn.to_port.component_id)

        def visit(u: str) -> bool:
            color[u] = GREY
            for v in adj[u]:
                if color[v] == GREY:
                    return True
                if color[v] == WHITE and visit(v):
                    return True
            color[u] = BLACK
            return False

        return any(color[c] == WHITE and visit(c) for c in self.components)

    # -- observation

    def add_observer(self, fn: Callable[[str, Event], None]) -> None:
        """Observe every event emission (component id, event); errors are swallowed."""
        self._observers.append(fn)

    def report_diagnostic(self, message: str) -> None:
        self.diagnostics.append(message)
        log.warning("assembly %s: %s", self.assembly_id, message)

    # -- event flow

    def _propagate(self, component: Component, event: Event) -> None:
        if event.kind not in component.socket_kinds:
            raise PortUnavailable(f"{component.component_id} has no {event.kind.value} socket")
        self._notify(component.component_id, event)
        for conn in list(self.connections):
            if conn.from_port.component_id == component.component_id and conn.from_port.kind is event.kind:
                self.components[conn.to_port.component_id].receive(event)

    def emit(self, component: Component, event: Event) -> None:
        """Deliver `event` to everything registered downstream of `component`.

        Synchronous and depth-first: each registrant finishes (including its
        own cascading emissions) before the next registrant sees the event.
        """
        with self._lock:
            if self.state is not AssemblyState.RUNNING:
                raise NotRunning(f"assembly {self.assembly_id} is {self.state.value}")
            self._propagate(component, event)

    def inject(self, component: Component, event: Event) -> None:
        """Deliver `event` to a component's plug, as if sent by an upstream."""
        with self._lock:
            if self.state is not AssemblyState.RUNNING:
                raise NotRunning(f"assembly {self.assembly_id} is {self.state.value}")
            component.receive(event)

    def post(self, component: Component, event: Event) -> bool:
        """Inbound transport delivery: emit downstream of `component` on the
        caller's thread, serialized by the assembly lock; drops silently
        unless RUNNING."""
        with self._lock:
            if self.state is not AssemblyState.RUNNING:
                log.debug("assembly %s not running; dropping inbound event", self.assembly_id)
                return False
            self._propagate(component, event)
            return True

    def _notify(self, component_id: str, event: Event) -> None:
        for fn in self._observers:
            try:
                fn(component_id, event)
            except Exception:
                log.exception("event observer failed")

    # -- lifecycle

    def start(self) -> None:
        with self._lock:
            if self.state is AssemblyState.RUNNING:
                raise InvalidStateTransition("already RUNNING")
            self.state = AssemblyState.RUNNING
        for comp in self.components.values():
            comp.on_start()

    def stop(self) -> None:
        if self.state is AssemblyState.STOPPED:
            return
        if self.state is not AssemblyState.RUNNING:
            raise InvalidStateTransition(f"cannot stop from {self.state.value}")
        # Quiesce sources without holding the lock, so in-flight emissions
        # (and source threads waiting on the lock) can drain first.
        for comp in self.components.values():
            comp.on_stop()
        with self._lock:
            self.state = AssemblyState.STOPPED


def connect(assembly: Assembly, from_port: Port, to_port: Port) -> Connection:
    return assembly.connect(from_port, to_port)


def bus_put(bus: Component, event: Event) -> None:
    """Inject a RECORD event into an event bus for fan-out to registrants."""
    if bus.catalog_kind != "event_bus":
        raise ValueError(f"{bus.component_id} is not an event_bus")
    if event.kind is not EventKind.RECORD:
        raise KindMismatch("event bus is RECORD-kinded")
    if bus.assembly is None:
        raise UnknownComponent(f"{bus.component_id} is not part of an assembly")
    bus.assembly.inject(bus, event)
