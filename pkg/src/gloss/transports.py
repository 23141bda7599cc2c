"""Concrete pipeline components: GPS source, location-event XML codec,
simulated SMS devices with segmentation and gateways, and the date-stamped
file sink, plus the two canonical assembly builders.

The SMS "wire" is text: each segment is the 160-character SMS body
``GX|<8-hex id>|<ii>/<tt>|<payload>`` (18-char header, 142-char payload
budget). Gateways move those bodies between devices, either in-process
(loopback) or over a TCP line protocol.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import os
import re
import secrets
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path
from typing import Any, Callable, Iterable
from xml.etree import ElementTree

from .errors import (
    GatewayUnreachable,
    InconsistentTotal,
    InvalidCharset,
    IoFailure,
    MalformedXml,
    MessageTooLong,
    MixedMessageIds,
    ParseFailure,
    RangeViolation,
    SchemaViolation,
)
from .pipeline import (
    AdaptDirection,
    Assembly,
    CodecAdapter,
    Component,
    Event,
    EventBus,
    EventKind,
    RecordEvent,
    TextEvent,
    register_codec,
)

log = logging.getLogger(__name__)

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
USER_ID_RE = re.compile(r"^\+\d{7,15}$")
MESSAGE_ID_RE = re.compile(r"^[0-9a-f]{8}$")

SMS_BODY_LIMIT = 160
SMS_HEADER_LEN = 18  # "GX|" + 8 hex + "|" + "ii/tt" + "|"
SMS_PAYLOAD_LIMIT = SMS_BODY_LIMIT - SMS_HEADER_LEN  # 142
SMS_MAX_SEGMENTS = 99  # two-digit header field

DEFAULT_SERVER_NUMBER = "+440000000001"


# --- domain records ------------------------------------------------------------

@dataclass(frozen=True)
class LatLongCoordinate:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise RangeViolation(f"lat {self.lat} outside [-90, 90]")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise RangeViolation(f"lon {self.lon} outside [-180, 180]")


def validate_user_id(value: str) -> str:
    if not isinstance(value, str) or not USER_ID_RE.match(value):
        raise SchemaViolation(f"user id {value!r} must be '+' followed by 7-15 digits")
    return value


@dataclass(frozen=True)
class LocationEvent:
    """A (user, coordinate, timestamp) record; timestamps are normalized to
    UTC at millisecond precision on construction."""

    user: str
    position: LatLongCoordinate
    timestamp: datetime

    def __post_init__(self) -> None:
        validate_user_id(self.user)
        ts = self.timestamp
        if ts.tzinfo is None:
            raise SchemaViolation("timestamp must be timezone-aware")
        ts = ts.astimezone(timezone.utc)
        ts = ts.replace(microsecond=ts.microsecond - ts.microsecond % 1000)
        if ts < EPOCH:
            raise RangeViolation(f"timestamp {ts.isoformat()} before Unix epoch")
        object.__setattr__(self, "timestamp", ts)


@dataclass(frozen=True)
class GpsFix:
    position: LatLongCoordinate
    fix_time: datetime


# --- location-event XML codec -------------------------------------------------------

def _format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S") + f".{ts.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise SchemaViolation(f"bad timestamp {text!r}: {exc}") from exc
    if ts.tzinfo is None:
        raise SchemaViolation(f"timestamp {text!r} lacks a timezone")
    return ts


def xml_encode(event: LocationEvent) -> str:
    """Encode to the canonical fragment; same event always yields identical bytes.

    Coordinates carry exactly 5 decimal places, timestamps millisecond UTC.
    """
    if not isinstance(event, LocationEvent):
        raise SchemaViolation(f"expected LocationEvent, got {type(event).__name__}")
    return (
        f'<locationEvent><user id="{event.user}"/>'
        f'<position lat="{event.position.lat:.5f}" lon="{event.position.lon:.5f}"/>'
        f"<timestamp>{_format_timestamp(event.timestamp)}</timestamp></locationEvent>"
    )


def xml_decode(fragment: str) -> LocationEvent:
    """Parse a location-event fragment; attribute order and surrounding
    whitespace are insignificant."""
    try:
        root = ElementTree.fromstring(fragment.strip())
    except ElementTree.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if root.tag != "locationEvent":
        raise SchemaViolation(f"unexpected root element {root.tag!r}")
    user_el = root.find("user")
    pos_el = root.find("position")
    ts_el = root.find("timestamp")
    if user_el is None or pos_el is None or ts_el is None or ts_el.text is None:
        raise SchemaViolation("locationEvent requires user, position and timestamp")
    user = user_el.get("id")
    lat, lon = pos_el.get("lat"), pos_el.get("lon")
    if user is None or lat is None or lon is None:
        raise SchemaViolation("missing user/@id or position/@lat/@lon")
    try:
        position = LatLongCoordinate(float(lat), float(lon))
    except ValueError as exc:
        raise SchemaViolation(f"non-numeric coordinate: {exc}") from exc
    return LocationEvent(user=user, position=position, timestamp=parse_timestamp(ts_el.text))


register_codec("location_xml", xml_encode, xml_decode)


# --- GPS traces -----------------------------------------------------------------------

def _nmea_coord(raw: str, hemisphere: str) -> float:
    """ddmm.mmm / dddmm.mmm -> decimal degrees; S/W negate. Exact via Decimal."""
    if "." in raw:
        intpart, frac = raw.split(".", 1)
    else:
        intpart, frac = raw, "0"
    if len(intpart) < 3:
        raise ParseFailure(f"bad NMEA coordinate {raw!r}")
    degrees = int(intpart[:-2])
    minutes = Decimal(f"{intpart[-2:]}.{frac}")
    value = float(Decimal(degrees) + minutes / 60)
    if hemisphere in ("S", "W"):
        value = -value
    elif hemisphere not in ("N", "E"):
        raise ParseFailure(f"bad hemisphere {hemisphere!r}")
    return value


def parse_nmea_gga(line: str) -> GpsFix:
    """Parse a GGA sentence; the checksum field is not verified."""
    body = line.strip()
    if "*" in body:
        body = body[: body.index("*")]
    fields = body.split(",")
    if len(fields) < 6 or not fields[0].startswith("$GP"):
        raise ParseFailure(f"not a GGA sentence: {line!r}")
    hhmmss = fields[1].split(".")[0]
    if len(hhmmss) != 6 or not hhmmss.isdigit():
        raise ParseFailure(f"bad GGA time {fields[1]!r}")
    fix_time = EPOCH.replace(hour=int(hhmmss[:2]), minute=int(hhmmss[2:4]), second=int(hhmmss[4:6]))
    position = LatLongCoordinate(_nmea_coord(fields[2], fields[3]), _nmea_coord(fields[4], fields[5]))
    return GpsFix(position=position, fix_time=fix_time)


def parse_trace_lines(lines: Iterable[str], source: str = "<trace>") -> list[GpsFix]:
    """Trace format: JSON lines {"lat","lon","time"}; lines beginning "$GP"
    are NMEA GGA sentences."""
    fixes: list[GpsFix] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            if line.startswith("$GP"):
                fixes.append(parse_nmea_gga(line))
                continue
            obj = json.loads(line)
            position = LatLongCoordinate(float(obj["lat"]), float(obj["lon"]))
            fixes.append(GpsFix(position=position, fix_time=parse_timestamp(str(obj["time"]))))
        except ParseFailure as exc:
            raise ParseFailure(f"{source}:{lineno}: {exc}") from exc
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, SchemaViolation, RangeViolation) as exc:
            raise ParseFailure(f"{source}:{lineno}: {exc}") from exc
    return fixes


def load_trace(path: str | Path) -> list[GpsFix]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read trace {path}: {exc}") from exc
    return parse_trace_lines(text.splitlines(), source=str(path))


# --- SMS segmentation ----------------------------------------------------------------------

@dataclass(frozen=True)
class SmsSegment:
    message_id: str
    index: int  # 1-based
    total: int
    payload: str

    def __post_init__(self) -> None:
        if not MESSAGE_ID_RE.match(self.message_id):
            raise ValueError(f"message id {self.message_id!r} must be 8 hex digits")
        if not (1 <= self.index <= self.total):
            raise ValueError(f"segment index {self.index} outside 1..{self.total}")
        if len(self.payload) > SMS_PAYLOAD_LIMIT:
            raise ValueError(f"payload exceeds {SMS_PAYLOAD_LIMIT} characters")


@dataclass(frozen=True)
class Incomplete:
    """Reassembly outcome when indices are still missing."""

    message_id: str
    missing: frozenset[int]


def new_message_id() -> str:
    return secrets.token_hex(4)


def sms_split(message: str, message_id: str | None = None) -> list[SmsSegment]:
    """Split a 7-bit-safe text into at most 99 segments of 142 payload chars."""
    if any(ord(ch) > 127 for ch in message):
        raise InvalidCharset("SMS payloads are restricted to 7-bit-safe characters")
    total = max(1, math.ceil(len(message) / SMS_PAYLOAD_LIMIT))
    if total > SMS_MAX_SEGMENTS:
        raise MessageTooLong(f"{len(message)} chars needs {total} segments (max {SMS_MAX_SEGMENTS})")
    mid = message_id if message_id is not None else new_message_id()
    return [
        SmsSegment(mid, i + 1, total, message[i * SMS_PAYLOAD_LIMIT : (i + 1) * SMS_PAYLOAD_LIMIT])
        for i in range(total)
    ]


def sms_reassemble(segments: Iterable[SmsSegment]) -> str | Incomplete:
    """Order-independent, duplicate-tolerant reassembly of one message."""
    segs = list(segments)
    if not segs:
        raise InconsistentTotal("no segments")
    mid = segs[0].message_id
    total = segs[0].total
    parts: dict[int, str] = {}
    for seg in segs:
        if seg.message_id != mid:
            raise MixedMessageIds(f"{seg.message_id} != {mid}")
        if seg.total != total:
            raise InconsistentTotal(f"totals disagree: {seg.total} != {total}")
        parts.setdefault(seg.index, seg.payload)
    missing = frozenset(range(1, total + 1)) - frozenset(parts)
    if missing:
        return Incomplete(message_id=mid, missing=missing)
    return "".join(parts[i] for i in range(1, total + 1))


def format_segment(seg: SmsSegment) -> str:
    """The literal SMS body: 18-char header + payload, at most 160 chars."""
    return f"GX|{seg.message_id}|{seg.index:02d}/{seg.total:02d}|{seg.payload}"


def parse_segment(body: str) -> SmsSegment:
    m = re.match(r"^GX\|([0-9a-f]{8})\|(\d{2})/(\d{2})\|", body)
    if not m:
        raise ParseFailure(f"unparseable SMS body {body[:24]!r}")
    try:
        return SmsSegment(m.group(1), int(m.group(2)), int(m.group(3)), body[m.end():])
    except ValueError as exc:
        raise ParseFailure(str(exc)) from exc


class SmsReassembler:
    """Accumulates segments per message id; returns each complete message once."""

    def __init__(self) -> None:
        self._pending: dict[str, tuple[int, dict[int, str]]] = {}
        self._done: set[str] = set()

    def add(self, seg: SmsSegment) -> str | None:
        if seg.message_id in self._done:
            return None
        total, parts = self._pending.setdefault(seg.message_id, (seg.total, {}))
        if seg.total != total:
            raise InconsistentTotal(f"message {seg.message_id}: totals {seg.total} != {total}")
        parts.setdefault(seg.index, seg.payload)
        if len(parts) == total:
            del self._pending[seg.message_id]
            self._done.add(seg.message_id)
            return "".join(parts[i] for i in range(1, total + 1))
        return None


# --- gateways -----------------------------------------------------------------------------

InboundHandler = Callable[[str, str], None]  # (sender number, sms body)


class LoopbackGateway:
    """In-process gateway: routes SMS bodies to registered device handlers."""

    def __init__(self, name: str = "loopback"):
        self.name = name
        self._routes: dict[str, InboundHandler] = {}
        self._lock = threading.Lock()

    def register(self, number: str, handler: InboundHandler) -> None:
        with self._lock:
            if number in self._routes:
                log.warning("gateway %s: %s re-registered, replacing handler", self.name, number)
            self._routes[number] = handler

    def unregister(self, number: str) -> None:
        with self._lock:
            self._routes.pop(number, None)

    def send(self, sender: str, recipient: str, body: str) -> None:
        with self._lock:
            handler = self._routes.get(recipient)
        if handler is None:
            log.info("gateway %s: no route for %s, dropping segment", self.name, recipient)
            return
        handler(sender, body)


def _encode_wire_payload(payload: str) -> str:
    return (
        payload.replace("%", "%25").replace("\t", "%09").replace("\n", "%0A").replace("\r", "%0D")
    )


def _decode_wire_payload(payload: str) -> str:
    return (
        payload.replace("%0D", "\r").replace("%0A", "\n").replace("%09", "\t").replace("%25", "%")
    )


def segment_to_wire_line(sender: str, recipient: str, seg: SmsSegment) -> str:
    fields = ["SMS", sender, recipient, seg.message_id, str(seg.index), str(seg.total),
              _encode_wire_payload(seg.payload)]
    return "\t".join(fields) + "\n"


def parse_wire_line(line: str) -> tuple[str, str, SmsSegment]:
    fields = line.rstrip("\n").rstrip("\r").split("\t")
    if len(fields) != 7 or fields[0] != "SMS":
        raise ParseFailure(f"bad gateway line {line[:40]!r}")
    _, sender, recipient, mid, index, total, payload = fields
    try:
        seg = SmsSegment(mid, int(index), int(total), _decode_wire_payload(payload))
    except ValueError as exc:
        raise ParseFailure(str(exc)) from exc
    return sender, recipient, seg


class TcpSegmentSender:
    """Client side of the TCP gateway line protocol (send-only)."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()

    def register(self, number: str, handler: InboundHandler) -> None:
        pass  # no inbound path on the sender side

    def unregister(self, number: str) -> None:
        pass

    def send(self, sender: str, recipient: str, body: str) -> None:
        seg = parse_segment(body)
        line = segment_to_wire_line(sender, recipient, seg).encode("utf-8")
        with self._lock:
            try:
                if self._sock is None:
                    self._sock = socket.create_connection((self.host, self.port), timeout=10)
                self._sock.sendall(line)
            except OSError as exc:
                self._sock = None
                raise GatewayUnreachable(f"{self.host}:{self.port}: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            if self._sock is not None:
                try:
                    self._sock.close()
                finally:
                    self._sock = None


class TcpSegmentListener:
    """Server side of the TCP gateway: delivers inbound segments to local devices."""

    def __init__(self, host: str, port: int):
        self._routes: dict[str, InboundHandler] = {}
        self._lock = threading.Lock()
        listener = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self) -> None:
                for raw in self.rfile:
                    try:
                        line = raw.decode("utf-8")
                        sender, recipient, seg = parse_wire_line(line)
                    except (UnicodeDecodeError, ParseFailure) as exc:
                        log.warning("tcp gateway: dropping bad line: %s", exc)
                        continue
                    listener.deliver(sender, recipient, seg)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.host, self.port = self._server.server_address[0], self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def register(self, number: str, handler: InboundHandler) -> None:
        with self._lock:
            self._routes[number] = handler

    def unregister(self, number: str) -> None:
        with self._lock:
            self._routes.pop(number, None)

    def deliver(self, sender: str, recipient: str, seg: SmsSegment) -> None:
        with self._lock:
            handler = self._routes.get(recipient)
        if handler is None:
            log.info("tcp gateway: no route for %s", recipient)
            return
        handler(sender, format_segment(seg))

    def send(self, sender: str, recipient: str, body: str) -> None:
        self.deliver(sender, recipient, parse_segment(body))

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()


class GatewayRegistry:
    """Named in-process loopback gateways, shared across assemblies."""

    def __init__(self) -> None:
        self._gateways: dict[str, LoopbackGateway] = {}
        self._lock = threading.Lock()

    def get_or_create(self, name: str) -> LoopbackGateway:
        with self._lock:
            if name not in self._gateways:
                self._gateways[name] = LoopbackGateway(name)
            return self._gateways[name]


_default_registry = GatewayRegistry()


def resolve_gateway(spec: Any, registry: GatewayRegistry | None = None) -> Any:
    """Resolve a gateway spec string to a gateway object.

    Accepted forms: ``loopback:<name>``, ``tcp://host:port`` (connect) and
    ``tcp-listen://host:port`` (listen). Gateway objects pass through.
    """
    if not isinstance(spec, str):
        return spec
    registry = registry or _default_registry
    if spec.startswith("loopback:"):
        return registry.get_or_create(spec.split(":", 1)[1] or "default")
    if spec.startswith("tcp://"):
        host, _, port = spec[len("tcp://"):].partition(":")
        return TcpSegmentSender(host, int(port))
    if spec.startswith("tcp-listen://"):
        host, _, port = spec[len("tcp-listen://"):].partition(":")
        return TcpSegmentListener(host, int(port))
    raise GatewayUnreachable(f"unrecognized gateway spec {spec!r}")


# --- devices -------------------------------------------------------------------------------

class SmsDevice(Component):
    """SMS-capable device: outbound TEXT events are segmented and sent to the
    gateway; inbound segments are reassembled and emitted as TEXT events."""

    catalog_kind = "sms_device"
    plug_kinds = frozenset({EventKind.TEXT})
    socket_kinds = frozenset({EventKind.TEXT})

    def __init__(self, component_id: str, gateway: Any, own_number: str, peer_number: str | None = None):
        super().__init__(component_id, {"own_number": own_number, "peer_number": peer_number})
        self.gateway = resolve_gateway(gateway)
        self.own_number = validate_user_id(own_number)
        self.peer_number = validate_user_id(peer_number) if peer_number else None
        self._reassembler = SmsReassembler()
        self._rx_lock = threading.Lock()

    def handle_text(self, event: Event) -> None:
        if self.peer_number is None:
            raise GatewayUnreachable(f"{self.component_id} has no peer_number configured")
        for seg in sms_split(event.payload):
            self.gateway.send(self.own_number, self.peer_number, format_segment(seg))

    def on_start(self) -> None:
        self.gateway.register(self.own_number, self._on_sms)

    def on_stop(self) -> None:
        self.gateway.unregister(self.own_number)

    def _on_sms(self, sender: str, body: str) -> None:
        try:
            seg = parse_segment(body)
            with self._rx_lock:
                message = self._reassembler.add(seg)
        except (ParseFailure, InconsistentTotal) as exc:
            self._diagnostic(f"dropping inbound SMS from {sender}: {exc}")
            return
        if message is None:
            return
        if not self._accept_inbound(message):
            return
        if self.assembly is not None:
            self.assembly.post(self, TextEvent(message))

    def _accept_inbound(self, message: str) -> bool:
        return True

    def _diagnostic(self, msg: str) -> None:
        if self.assembly is not None:
            self.assembly.report_diagnostic(f"{self.component_id}: {msg}")
        else:
            log.warning("%s: %s", self.component_id, msg)


class SmsXmlDevice(SmsDevice):
    """SMS device whose inbound messages must be valid location-event XML;
    invalid messages are dropped with a diagnostic."""

    catalog_kind = "sms_xml_device"

    def _accept_inbound(self, message: str) -> bool:
        try:
            xml_decode(message)
            return True
        except (MalformedXml, SchemaViolation, RangeViolation) as exc:
            self._diagnostic(f"dropping invalid XML message: {exc.code}")
            return False


# --- file sink --------------------------------------------------------------------------------

_sink_counter = itertools.count(1)
_sink_clock_lock = threading.Lock()
_sink_last_ms = 0


def _next_sink_name(now_ms: int | None = None) -> str:
    """Date-stamped filename with a per-process sequence counter; names
    strictly increase lexicographically within a run."""
    global _sink_last_ms
    with _sink_clock_lock:
        ms = int(time.time() * 1000) if now_ms is None else now_ms
        ms = max(ms, _sink_last_ms)  # clamp a backwards wall clock
        _sink_last_ms = ms
        seq = next(_sink_counter)
    stamp = datetime.fromtimestamp(ms / 1000, tz=timezone.utc)
    return f"{stamp:%Y%m%d-%H%M%S}.{ms % 1000:03d}-{seq:04d}.xml"


class FileSink(Component):
    """Writes each TEXT event to its own date-stamped file, atomically."""

    catalog_kind = "file_sink"
    plug_kinds = frozenset({EventKind.TEXT})

    def __init__(self, component_id: str, directory: str | Path):
        super().__init__(component_id, {"directory": str(directory)})
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise IoFailure(f"sink directory {self.directory} does not exist")

    def handle_text(self, event: Event) -> None:
        name = _next_sink_name()
        tmp = self.directory / f".tmp-{name}"
        try:
            tmp.write_text(event.payload, encoding="utf-8")
            os.replace(tmp, self.directory / name)
        except OSError as exc:
            tmp.unlink(missing_ok=True)
            if self.assembly is not None:
                self.assembly.report_diagnostic(f"{self.component_id}: write failed, event dropped: {exc}")


# --- GPS source -----------------------------------------------------------------------------------

DEFAULT_TRACE_START = datetime(2002, 9, 1, 12, 0, 0, tzinfo=timezone.utc)


class GpsSource(Component):
    """Emits one RECORD LocationEvent per trace fix on start.

    Simulated clock (default): timestamps start at `start_time` and advance
    by `interval_ms` per fix, emitted synchronously during start. Wall
    clock: a thread emits at real intervals until the trace ends or the
    assembly stops.
    """

    catalog_kind = "gps_source"
    socket_kinds = frozenset({EventKind.RECORD})

    def __init__(
        self,
        component_id: str,
        trace: list[GpsFix],
        interval_ms: int,
        user: str,
        clock: str = "simulated",
        start_time: datetime = DEFAULT_TRACE_START,
    ):
        if interval_ms <= 0:
            raise ValueError("interval_ms must be positive")
        if clock not in ("simulated", "wall"):
            raise ValueError(f"unknown clock mode {clock!r}")
        super().__init__(component_id, {"interval_ms": interval_ms, "user": user, "clock": clock})
        self.trace = list(trace)
        self.interval_ms = interval_ms
        self.user = validate_user_id(user)
        self.clock = clock
        self.start_time = start_time
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _event_for(self, fix: GpsFix, ts: datetime) -> RecordEvent:
        return RecordEvent(LocationEvent(user=self.user, position=fix.position, timestamp=ts))

    def on_start(self) -> None:
        self._stop.clear()
        if self.clock == "simulated":
            for i, fix in enumerate(self.trace):
                ts = self.start_time + timedelta(milliseconds=i * self.interval_ms)
                self.emit(self._event_for(fix, ts))
            return
        self._thread = threading.Thread(target=self._run_wall_clock, daemon=True)
        self._thread.start()

    def _run_wall_clock(self) -> None:
        for fix in self.trace:
            if self._stop.is_set():
                return
            self.emit(self._event_for(fix, datetime.now(tz=timezone.utc)))
            if self._stop.wait(self.interval_ms / 1000.0):
                return

    def on_stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None


# --- canonical assemblies ----------------------------------------------------------------------------

def build_mobile_assembly(
    trace: list[GpsFix],
    interval_ms: int,
    user: str,
    gateway: Any,
    server_number: str = DEFAULT_SERVER_NUMBER,
    assembly_id: str = "mobile",
    clock: str = "simulated",
) -> Assembly:
    """GPS -> XML generator -> adapter -> event bus -> adapter -> SMS device.

    Six components, five connections; the bus is retained even though it has
    a single registrant.
    """
    asm = Assembly(assembly_id)
    gps = asm.add(GpsSource("gps", trace, interval_ms, user, clock=clock))
    xml_gen = asm.add(CodecAdapter("xml_generator", AdaptDirection.RECORD_TO_TEXT))
    gps_adapter = asm.add(CodecAdapter("gps_adapter", AdaptDirection.TEXT_TO_RECORD))
    bus = asm.add(EventBus("event_bus"))
    sms_adapter = asm.add(CodecAdapter("sms_adapter", AdaptDirection.RECORD_TO_TEXT))
    sms = asm.add(SmsDevice("sms_device", gateway, own_number=user, peer_number=server_number))
    asm.connect(gps.socket(EventKind.RECORD), xml_gen.plug(EventKind.RECORD))
    asm.connect(xml_gen.socket(EventKind.TEXT), gps_adapter.plug(EventKind.TEXT))
    asm.connect(gps_adapter.socket(EventKind.RECORD), bus.plug(EventKind.RECORD))
    asm.connect(bus.socket(EventKind.RECORD), sms_adapter.plug(EventKind.RECORD))
    asm.connect(sms_adapter.socket(EventKind.TEXT), sms.plug(EventKind.TEXT))
    return asm


def build_server_assembly(
    gateway: Any,
    directory: str | Path,
    own_number: str = DEFAULT_SERVER_NUMBER,
    assembly_id: str = "server",
) -> Assembly:
    """XML-validating SMS device -> date-stamped file sink."""
    asm = Assembly(assembly_id)
    sms = asm.add(SmsXmlDevice("sms_xml_device", gateway, own_number=own_number))
    sink = asm.add(FileSink("file_sink", directory))
    asm.connect(sms.socket(EventKind.TEXT), sink.plug(EventKind.TEXT))
    return asm
