"""Component catalog: the palette the control plane exposes and the factory
that instantiates declarative assembly specs through the pipeline kernel.

POST /assemblies and direct construction share ``instantiate_spec``, so the
two validation surfaces accept exactly the same specs.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import BadParams, GlossError, UnknownCatalogKind
from .pipeline import AdaptDirection, Assembly, CodecAdapter, Component, EventBus
from .transports import (
    FileSink,
    GatewayRegistry,
    GpsFix,
    GpsSource,
    LatLongCoordinate,
    SmsDevice,
    SmsXmlDevice,
    parse_timestamp,
    load_trace,
    parse_nmea_gga,
    resolve_gateway,
)


@dataclass
class BuildContext:
    """Resources the factories may need: the data dir anchors relative sink
    directories; the registry resolves loopback:<name> gateway specs."""

    data_dir: Path = field(default_factory=lambda: Path.cwd())
    gateway_registry: GatewayRegistry = field(default_factory=GatewayRegistry)


@dataclass(frozen=True)
class ParamSpec:
    type: str
    required: bool = False
    default: Any = None
    choices: tuple[str, ...] | None = None


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    description: str
    params: dict[str, ParamSpec]
    ports: list[dict[str, str]]
    port_variants: dict[str, list[dict[str, str]]] | None = None
    variant_param: str | None = None
    factory: Callable[[str, dict, BuildContext], Component] = None  # type: ignore[assignment]

    def describe(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "kind": self.kind,
            "description": self.description,
            "params": {
                name: {
                    "type": p.type,
                    "required": p.required,
                    **({"default": p.default} if p.default is not None else {}),
                    **({"choices": list(p.choices)} if p.choices else {}),
                }
                for name, p in self.params.items()
            },
            "ports": self.ports,
        }
        if self.port_variants is not None:
            doc["port_variants"] = self.port_variants
            doc["variant_param"] = self.variant_param
        return doc


def _require(params: dict, name: str, kind: str) -> Any:
    if name not in params or params[name] in (None, ""):
        raise BadParams(f"{kind} requires param {name!r}")
    return params[name]


def _parse_inline_trace(items: list) -> list[GpsFix]:
    fixes = []
    for item in items:
        if isinstance(item, str):
            fixes.append(parse_nmea_gga(item))
        elif isinstance(item, dict):
            fixes.append(
                GpsFix(
                    position=LatLongCoordinate(float(item["lat"]), float(item["lon"])),
                    fix_time=parse_timestamp(str(item["time"])),
                )
            )
        else:
            raise BadParams(f"trace items must be objects or NMEA strings, got {type(item).__name__}")
    return fixes


def _make_gps(component_id: str, params: dict, ctx: BuildContext) -> Component:
    if "trace" in params:
        trace = _parse_inline_trace(params["trace"])
    elif "trace_path" in params:
        path = Path(params["trace_path"])
        if not path.is_absolute():
            path = ctx.data_dir / path
        trace = load_trace(path)
    else:
        raise BadParams("gps_source requires 'trace' (inline) or 'trace_path'")
    interval = int(params.get("interval_ms", 1000))
    return GpsSource(
        component_id,
        trace,
        interval,
        user=str(_require(params, "user", "gps_source")),
        clock=str(params.get("clock", "simulated")),
    )


def _make_sms(cls: type) -> Callable[[str, dict, BuildContext], Component]:
    def make(component_id: str, params: dict, ctx: BuildContext) -> Component:
        gateway = resolve_gateway(str(_require(params, "gateway", cls.catalog_kind)), ctx.gateway_registry)
        peer = params.get("peer_number")
        return cls(
            component_id,
            gateway,
            own_number=str(_require(params, "own_number", cls.catalog_kind)),
            peer_number=str(peer) if peer else None,
        )

    return make


def _make_adapter(component_id: str, params: dict, ctx: BuildContext) -> Component:
    raw = str(_require(params, "direction", "xml_codec_adapter")).upper()
    try:
        direction = AdaptDirection(raw)
    except ValueError:
        raise BadParams(f"direction must be RECORD_TO_TEXT or TEXT_TO_RECORD, got {raw!r}") from None
    return CodecAdapter(component_id, direction, codec=str(params.get("codec", "location_xml")))


def _make_sink(component_id: str, params: dict, ctx: BuildContext) -> Component:
    directory = Path(str(_require(params, "directory", "file_sink")))
    if not directory.is_absolute():
        directory = ctx.data_dir / directory
        directory.mkdir(parents=True, exist_ok=True)
    return FileSink(component_id, directory)


def _make_bus(component_id: str, params: dict, ctx: BuildContext) -> Component:
    return EventBus(component_id)


_TEXT_PLUG = {"direction": "PLUG", "kind": "TEXT"}
_TEXT_SOCKET = {"direction": "SOCKET", "kind": "TEXT"}
_RECORD_PLUG = {"direction": "PLUG", "kind": "RECORD"}
_RECORD_SOCKET = {"direction": "SOCKET", "kind": "RECORD"}

CATALOG: dict[str, CatalogEntry] = {
    entry.kind: entry
    for entry in [
        CatalogEntry(
            kind="event_bus",
            description="Delivers each RECORD event to every registrant, in registration order.",
            params={},
            ports=[_RECORD_PLUG, _RECORD_SOCKET],
            factory=_make_bus,
        ),
        CatalogEntry(
            kind="gps_source",
            description="Replays a GPS trace as location-event records at a fixed interval.",
            params={
                "trace": ParamSpec("list", required=False),
                "trace_path": ParamSpec("string", required=False),
                "interval_ms": ParamSpec("integer", default=1000),
                "user": ParamSpec("string", required=True),
                "clock": ParamSpec("string", default="simulated", choices=("simulated", "wall")),
            },
            ports=[_RECORD_SOCKET],
            factory=_make_gps,
        ),
        CatalogEntry(
            kind="sms_device",
            description="Sends TEXT events to an SMS gateway as segments; emits reassembled inbound messages.",
            params={
                "gateway": ParamSpec("string", required=True),
                "own_number": ParamSpec("string", required=True),
                "peer_number": ParamSpec("string"),
            },
            ports=[_TEXT_PLUG, _TEXT_SOCKET],
            factory=_make_sms(SmsDevice),
        ),
        CatalogEntry(
            kind="sms_xml_device",
            description="SMS device that drops inbound messages that are not valid location-event XML.",
            params={
                "gateway": ParamSpec("string", required=True),
                "own_number": ParamSpec("string", required=True),
                "peer_number": ParamSpec("string"),
            },
            ports=[_TEXT_PLUG, _TEXT_SOCKET],
            factory=_make_sms(SmsXmlDevice),
        ),
        CatalogEntry(
            kind="xml_codec_adapter",
            description="Converts events between RECORD and TEXT through a named codec.",
            params={
                "direction": ParamSpec(
                    "string", required=True, choices=("RECORD_TO_TEXT", "TEXT_TO_RECORD")
                ),
                "codec": ParamSpec("string", default="location_xml"),
            },
            ports=[],
            port_variants={
                "RECORD_TO_TEXT": [_RECORD_PLUG, _TEXT_SOCKET],
                "TEXT_TO_RECORD": [_TEXT_PLUG, _RECORD_SOCKET],
            },
            variant_param="direction",
            factory=_make_adapter,
        ),
        CatalogEntry(
            kind="file_sink",
            description="Writes each TEXT event to its own date-stamped file.",
            params={"directory": ParamSpec("string", required=True)},
            ports=[_TEXT_PLUG],
            factory=_make_sink,
        ),
    ]
}


def describe_catalog() -> list[dict[str, Any]]:
    return [CATALOG[kind].describe() for kind in sorted(CATALOG)]


def new_assembly_id() -> str:
    return "asm-" + secrets.token_hex(4)


def instantiate_spec(doc: dict, ctx: BuildContext, assembly_id: str | None = None) -> Assembly:
    """Build an assembly from a declarative spec document.

    Raises GlossError subclasses with machine-readable codes on any
    validation failure (UnknownCatalogKind, BadParams, DuplicateComponentId,
    KindMismatch, AmbiguousPorts, CycleWouldForm, UnknownComponent).
    """
    if not isinstance(doc, dict):
        raise BadParams("assembly spec must be an object")
    components = doc.get("components")
    connections = doc.get("connections", [])
    if not isinstance(components, list) or not components:
        raise BadParams("spec requires a non-empty 'components' list")
    if not isinstance(connections, list):
        raise BadParams("'connections' must be a list")
    assembly = Assembly(assembly_id or new_assembly_id())
    for comp_doc in components:
        if not isinstance(comp_doc, dict):
            raise BadParams("each component must be an object")
        kind = comp_doc.get("catalog_kind")
        entry = CATALOG.get(str(kind))
        if entry is None:
            raise UnknownCatalogKind(str(kind))
        comp_id = str(comp_doc.get("id") or "")
        if not comp_id:
            raise BadParams("each component requires an 'id'")
        params = comp_doc.get("params") or {}
        if not isinstance(params, dict):
            raise BadParams(f"{comp_id}: params must be an object")
        try:
            component = entry.factory(comp_id, params, ctx)
        except GlossError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise BadParams(f"{comp_id}: {exc}") from exc
        assembly.add(component)
    for conn_doc in connections:
        if not isinstance(conn_doc, dict) or "from" not in conn_doc or "to" not in conn_doc:
            raise BadParams("each connection requires 'from' and 'to' component ids")
        assembly.connect_components(str(conn_doc["from"]), str(conn_doc["to"]))
    return assembly
