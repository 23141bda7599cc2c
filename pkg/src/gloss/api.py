"""HTTP control plane: component catalog, dynamic assembly construction and
lifecycle, event taps and live streams, the location/trail/smart-town/radar
query endpoints, and synchronous simulator runs.

JSON is the canonical response format; the query endpoints also render
minimal HTML when the Accept header prefers it. Every error response
carries a machine-readable ``error`` code.
"""

from __future__ import annotations

import collections
import html
import json
import logging
import queue
import secrets
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .catalog import BuildContext, describe_catalog, instantiate_spec, new_assembly_id
from .errors import BadParams, GlossError, InvalidRange
from .pipeline import Assembly, Event
from .services import LocationServices, load_maps
from .sim import SimMetrics, flood_policy, geo_greedy_policy, run as run_sim, topology_from_dict, workload_from_list
from .store import GlossStore, InboxWatcher
from .transports import LatLongCoordinate, LocationEvent, parse_timestamp, xml_encode

log = logging.getLogger(__name__)

MAX_SIM_EVENTS = 1_000_000

_STATUS_BY_CODE = {
    "UnknownCatalogKind": 422,
    "KindMismatch": 422,
    "AmbiguousPorts": 422,
    "CycleWouldForm": 422,
    "DuplicateComponentId": 422,
    "BadParams": 422,
    "UnknownComponent": 422,
    "PortUnavailable": 422,
    "UnknownCodec": 422,
    "ValidationFailure": 422,
    "MissingPositions": 422,
    "ParseFailure": 422,
    "InvalidStateTransition": 409,
    "InvalidRange": 400,
    "RangeViolation": 400,
    "NoKnownLocation": 404,
    "EmptyTrail": 404,
    "NoMapConfigured": 404,
    "SimulationTooLarge": 413,
    "IoFailure": 500,
    "GatewayUnreachable": 502,
}


@dataclass
class EventTap:
    """Ring buffer of recent events plus live subscriber queues."""

    capacity: int = 256
    buffer: collections.deque = field(default_factory=lambda: collections.deque(maxlen=256))
    subscribers: list[queue.SimpleQueue] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def observe(self, component_id: str, event: Event) -> None:
        entry = {
            "time": datetime.now(tz=timezone.utc).isoformat(timespec="milliseconds"),
            "component": component_id,
            "kind": event.kind.value,
            "preview": str(event.payload)[:200],
        }
        with self.lock:
            self.buffer.append(entry)
            subscribers = list(self.subscribers)
        for q in subscribers:
            q.put(entry)

    def snapshot(self) -> list[dict]:
        with self.lock:
            return list(self.buffer)

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self.lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)


@dataclass
class AssemblyRecord:
    assembly: Assembly
    spec: dict
    tap: EventTap
    lifecycle_lock: threading.Lock = field(default_factory=threading.Lock)


class ServerState:
    """Everything behind the HTTP surface; owned by one app instance."""

    def __init__(self, data_dir: str | Path, tap_capacity: int = 256, watch: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.assemblies_dir = self.data_dir / "assemblies"
        self.assemblies_dir.mkdir(exist_ok=True)
        self.maps_dir = self.data_dir / "maps"
        self.tap_capacity = tap_capacity
        self.watch_enabled = watch

        self.store = GlossStore(self.data_dir)
        self._load_knowledge()
        maps_file = self.data_dir / "maps.jsonl"
        maps = load_maps(maps_file) if maps_file.exists() else []
        self.services = LocationServices(self.store, maps)
        self.services.attach_hearsay_delivery()
        self.store.rebuild_from_loaded()
        self.watcher = InboxWatcher(self.store)

        self.build_ctx = BuildContext(data_dir=self.data_dir)
        self.assemblies: dict[str, AssemblyRecord] = {}
        self.simulations: dict[str, SimMetrics] = {}
        self._restore_assemblies()

    def _load_knowledge(self) -> None:
        def existing(name: str) -> Path | None:
            p = self.data_dir / name
            return p if p.exists() else None

        self.store.load_knowledge(
            existing("facilities.jsonl"),
            existing("landmarks.jsonl"),
            existing("hearsay.jsonl"),
            existing("visibility.jsonl"),
        )

    def _restore_assemblies(self) -> None:
        for path in sorted(self.assemblies_dir.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                self.register_assembly(doc["spec"], assembly_id=doc["id"], persist=False)
            except (OSError, json.JSONDecodeError, KeyError, GlossError) as exc:
                log.warning("skipping persisted assembly %s: %s", path.name, exc)

    def register_assembly(self, spec: dict, assembly_id: str | None = None, persist: bool = True) -> str:
        assembly_id = assembly_id or new_assembly_id()
        assembly = instantiate_spec(spec, self.build_ctx, assembly_id=assembly_id)
        tap = EventTap(capacity=self.tap_capacity,
                       buffer=collections.deque(maxlen=self.tap_capacity))
        assembly.add_observer(tap.observe)
        self.assemblies[assembly_id] = AssemblyRecord(assembly=assembly, spec=spec, tap=tap)
        if persist:
            path = self.assemblies_dir / f"{assembly_id}.json"
            path.write_text(json.dumps({"id": assembly_id, "spec": spec}, indent=2), encoding="utf-8")
        return assembly_id

    def start_background(self) -> None:
        if self.watch_enabled:
            self.watcher.start()

    def shutdown(self) -> None:
        self.watcher.stop()
        for record in self.assemblies.values():
            with record.lifecycle_lock:
                try:
                    record.assembly.stop()
                except GlossError:
                    pass


# --- response helpers ---------------------------------------------------------

def _error_response(exc: GlossError) -> JSONResponse:
    status = _STATUS_BY_CODE.get(exc.code, 422)
    return JSONResponse(status_code=status, content={"error": exc.code, "detail": str(exc)})


def _wants_html(request: Request) -> bool:
    accept = request.headers.get("accept", "")
    if "text/html" not in accept:
        return False
    html_pos = accept.index("text/html")
    json_pos = accept.find("application/json")
    return json_pos == -1 or html_pos < json_pos


def _event_json(event: LocationEvent) -> dict[str, Any]:
    return {
        "user": event.user,
        "lat": event.position.lat,
        "lon": event.position.lon,
        "timestamp": event.timestamp.isoformat(timespec="milliseconds").replace("+00:00", "Z"),
        "xml": xml_encode(event),
    }


def _html_page(title: str, body: str) -> HTMLResponse:
    return HTMLResponse(
        f"<!doctype html><html><head><title>{html.escape(title)}</title></head>"
        f"<body><h1>{html.escape(title)}</h1>{body}</body></html>"
    )


def _parse_query_time(raw: str | None, name: str) -> datetime | None:
    if raw is None or raw == "":
        return None
    try:
        return parse_timestamp(raw)
    except GlossError as exc:
        raise BadParams(f"bad {name!r} timestamp: {exc}") from exc


def create_app(
    data_dir: str | Path,
    tap_capacity: int = 256,
    watch: bool = True,
    workbench_dir: str | Path | None = None,
) -> FastAPI:
    """Build the control-plane app rooted at `data_dir`.

    `workbench_dir` optionally mounts a built browser workbench at
    /workbench; CORS is permissive so a separately served workbench can
    also consume the API.
    """

    state = ServerState(data_dir, tap_capacity=tap_capacity, watch=watch)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        state.start_background()
        try:
            yield
        finally:
            state.shutdown()

    app = FastAPI(title="gloss control plane", lifespan=lifespan)
    app.state.gloss = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    if workbench_dir is not None:
        app.mount("/workbench", StaticFiles(directory=workbench_dir, html=True), name="workbench")

    @app.exception_handler(GlossError)
    async def _gloss_error(_request: Request, exc: GlossError) -> JSONResponse:
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": "BadParams", "detail": str(exc)})

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_request: Request, exc: StarletteHTTPException) -> JSONResponse:
        code = {404: "NotFound", 405: "MethodNotAllowed"}.get(exc.status_code, "HttpError")
        return JSONResponse(status_code=exc.status_code, content={"error": code, "detail": str(exc.detail)})

    # -- catalog and assemblies

    @app.get("/components")
    def components() -> list[dict]:
        return describe_catalog()

    @app.post("/assemblies", status_code=201)
    def create_assembly(spec: dict) -> dict:
        assembly_id = state.register_assembly(spec)
        return {"id": assembly_id}

    def _record(assembly_id: str) -> AssemblyRecord:
        record = state.assemblies.get(assembly_id)
        if record is None:
            raise NoKnownAssembly(assembly_id)
        return record

    @app.get("/assemblies")
    def list_assemblies() -> list[dict]:
        return [
            {"id": aid, "state": rec.assembly.state.value}
            for aid, rec in sorted(state.assemblies.items())
        ]

    @app.get("/assemblies/{assembly_id}")
    def get_assembly(assembly_id: str) -> dict:
        record = _record(assembly_id)
        return {
            "id": assembly_id,
            "state": record.assembly.state.value,
            "spec": record.spec,
            "diagnostics": list(record.assembly.diagnostics),
        }

    @app.post("/assemblies/{assembly_id}/start")
    def start_assembly(assembly_id: str) -> dict:
        record = _record(assembly_id)
        with record.lifecycle_lock:
            record.assembly.start()
        return {"id": assembly_id, "state": record.assembly.state.value}

    @app.post("/assemblies/{assembly_id}/stop")
    def stop_assembly(assembly_id: str) -> dict:
        record = _record(assembly_id)
        with record.lifecycle_lock:
            record.assembly.stop()
        return {"id": assembly_id, "state": record.assembly.state.value}

    @app.get("/assemblies/{assembly_id}/events")
    def assembly_events(assembly_id: str) -> list[dict]:
        return _record(assembly_id).tap.snapshot()

    @app.get("/assemblies/{assembly_id}/stream")
    def assembly_stream(assembly_id: str) -> StreamingResponse:
        record = _record(assembly_id)
        tap = record.tap

        def gen() -> Iterator[str]:
            q = tap.subscribe()
            try:
                while True:
                    try:
                        entry = q.get(timeout=0.5)
                    except queue.Empty:
                        yield "\n"  # keep-alive; lets disconnects surface
                        continue
                    yield json.dumps(entry) + "\n"
            finally:
                tap.unsubscribe(q)

        return StreamingResponse(gen(), media_type="application/x-ndjson")

    # -- queries

    @app.get("/users/{user_id}/location")
    def user_location(user_id: str, request: Request) -> Response:
        located = state.services.locate_user(user_id)
        if located is None:
            return JSONResponse(status_code=404, content={"error": "NoKnownLocation", "detail": user_id})
        event, placement = located
        body = _event_json(event)
        if placement is not None:
            body["map"] = {"image_id": placement.image_id, "x": placement.x, "y": placement.y}
        if _wants_html(request):
            extra = (
                f"<p><img src='/maps/{html.escape(placement.image_id)}' alt='map'/></p>"
                if placement is not None
                else ""
            )
            return _html_page(
                f"Location of {user_id}",
                f"<p>{body['lat']:.5f}, {body['lon']:.5f} at {body['timestamp']}</p>{extra}",
            )
        return JSONResponse(content=body)

    @app.get("/users/{user_id}/trail")
    def user_trail(
        user_id: str,
        request: Request,
        from_raw: str | None = Query(default=None, alias="from"),
        to: str | None = None,
    ) -> Response:
        from_time = _parse_query_time(from_raw, "from")
        to_time = _parse_query_time(to, "to")
        if from_time is not None and to_time is not None and from_time > to_time:
            raise InvalidRange("from > to")
        events = state.store.trail(user_id, from_time, to_time)
        body: dict[str, Any] = {"user": user_id, "points": [_event_json(e) for e in events]}
        if events and state.services.maps:
            view = state.services.render_trail(user_id, from_time, to_time)
            body["view"] = {
                "map": view.map.image_id,
                "bbox": {
                    "south": view.bbox[0],
                    "west": view.bbox[1],
                    "north": view.bbox[2],
                    "east": view.bbox[3],
                },
                "pixels": [{"x": x, "y": y} for x, y in view.points],
            }
        if _wants_html(request):
            rows = "".join(
                f"<li>{p['timestamp']}: {p['lat']:.5f}, {p['lon']:.5f}</li>" for p in body["points"]
            )
            return _html_page(f"Trail of {user_id}", f"<ol>{rows}</ol>")
        return JSONResponse(content=body)

    @app.get("/smarttown")
    def smarttown(
        request: Request,
        lat: float,
        lon: float,
        radius: float,
        category: str | None = None,
    ) -> Response:
        result = state.services.smart_town(LatLongCoordinate(lat, lon), radius, category)
        entries = [
            {
                "id": e.facility.id,
                "name": e.facility.name,
                "category": e.facility.category,
                "lat": e.facility.position.lat,
                "lon": e.facility.position.lon,
                "info": e.facility.info,
                "distance_m": e.distance_m,
                "prev": e.prev_id,
                "next": e.next_id,
            }
            for e in result.entries
        ]
        if _wants_html(request):
            items = "".join(
                f"<li>{html.escape(e['name'])} ({html.escape(e['category'])}) "
                f"{e['distance_m']:.0f} m</li>"
                for e in entries
            )
            return _html_page("Smart town", f"<ul>{items}</ul>" if items else "<p>nothing nearby</p>")
        return JSONResponse(content={"entries": entries})

    @app.get("/users/{user_id}/radar")
    def radar(user_id: str, request: Request, radius: float) -> Response:
        entries = state.services.radar(user_id, radius)
        body = [
            {
                "kind": e.kind.value,
                "id": e.id,
                "name": e.name,
                "distance_m": e.distance_m,
                "bearing_deg": e.bearing_deg,
            }
            for e in entries
        ]
        if _wants_html(request):
            items = "".join(
                f"<li>{html.escape(e['kind'])} {html.escape(e['name'])}: "
                f"{e['distance_m']:.0f} m at {e['bearing_deg']:.0f}&deg;</li>"
                for e in body
            )
            return _html_page(f"Radar for {user_id}", f"<ul>{items}</ul>")
        return JSONResponse(content={"entries": body})

    # -- simulations

    @app.post("/simulations", status_code=201)
    def create_simulation(doc: dict) -> dict:
        topology = topology_from_dict(doc.get("topology") or {})
        workload = workload_from_list(doc.get("workload") or [])
        policy_name = str(doc.get("policy", "flood"))
        try:
            if policy_name == "flood":
                policy = flood_policy(int(doc.get("ttl", 8)))
            elif policy_name == "geo":
                policy = geo_greedy_policy()
            else:
                raise BadParams(f"unknown policy {policy_name!r}")
            seed = int(doc.get("seed", 0))
            horizon = doc.get("horizon_ms")
            horizon = int(horizon) if horizon is not None else None
        except (TypeError, ValueError) as exc:
            raise BadParams(f"bad simulation parameters: {exc}") from exc
        metrics = run_sim(
            topology,
            workload,
            policy,
            seed,
            horizon_ms=horizon,
            max_events=MAX_SIM_EVENTS,
        )
        sim_id = "sim-" + secrets.token_hex(4)
        state.simulations[sim_id] = metrics
        return {"id": sim_id}

    @app.get("/simulations/{sim_id}/metrics")
    def simulation_metrics(sim_id: str) -> Response:
        metrics = state.simulations.get(sim_id)
        if metrics is None:
            return JSONResponse(status_code=404, content={"error": "UnknownSimulation", "detail": sim_id})
        return JSONResponse(content=metrics.as_dict())

    # -- static maps

    @app.get("/maps/{image_id}")
    def map_image(image_id: str) -> FileResponse:
        path = (state.maps_dir / image_id).resolve()
        if not str(path).startswith(str(state.maps_dir.resolve())) or not path.is_file():
            raise NoKnownAssembly(image_id)  # 404 via handler below
        return FileResponse(path)

    return app


class NoKnownAssembly(GlossError):
    code = "UnknownAssembly"


_STATUS_BY_CODE["UnknownAssembly"] = 404
