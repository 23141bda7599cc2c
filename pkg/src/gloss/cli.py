"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 I/O error. Query verbs read
the store directly from the data dir (GLOSS_DATA_DIR or --data-dir).
"""

from __future__ import annotations

import functools
import json
import logging
import sys
import time
from pathlib import Path

import click

from .errors import GlossError, IoFailure
from .services import LocationServices, load_maps
from .sim import emit_metrics, flood_policy, geo_greedy_policy, load_topology, load_workload, run as run_sim
from .store import GlossStore, InboxWatcher
from .transports import (
    DEFAULT_SERVER_NUMBER,
    build_mobile_assembly,
    build_server_assembly,
    load_trace,
    parse_timestamp,
    resolve_gateway,
)

log = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_IO = 2


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except IoFailure as exc:
            click.echo(str(exc), err=True)
            sys.exit(EXIT_IO)
        except GlossError as exc:
            click.echo(str(exc), err=True)
            sys.exit(EXIT_VALIDATION)
        except OSError as exc:
            click.echo(f"IoFailure: {exc}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _data_dir(value: str | None) -> Path:
    import os

    return Path(value or os.environ.get("GLOSS_DATA_DIR", "./gloss-data"))


def _open_services(data_dir: Path) -> tuple[GlossStore, LocationServices]:
    store = GlossStore(data_dir)
    store.load_knowledge(
        *(p if (p := data_dir / name).exists() else None for name in
          ("facilities.jsonl", "landmarks.jsonl", "hearsay.jsonl", "visibility.jsonl"))
    )
    maps_file = data_dir / "maps.jsonl"
    maps = load_maps(maps_file) if maps_file.exists() else []
    services = LocationServices(store, maps)
    services.attach_hearsay_delivery()
    store.rebuild_from_loaded()
    return store, services


@click.group()
def main() -> None:
    """Location-aware service assemblies: pipelines, store, simulator, server."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--data-dir", default=None, help="Data directory (default: $GLOSS_DATA_DIR or ./gloss-data).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--workbench", default=None, type=click.Path(exists=True, file_okay=False),
              help="Serve a built browser workbench at /workbench.")
@_handle_errors
def serve(data_dir: str | None, host: str, port: int, workbench: str | None) -> None:
    """Run the HTTP control plane (ingest watcher included)."""
    import uvicorn

    from .api import create_app

    app = create_app(_data_dir(data_dir), workbench_dir=workbench)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("run-mobile")
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gateway", required=True, help="Gateway spec, e.g. tcp://127.0.0.1:7070 or loopback:default.")
@click.option("--user", required=True, help="Phone-number-form user id, e.g. +447700900123.")
@click.option("--interval", "interval_ms", default=1000, show_default=True, type=int)
@click.option("--server-number", default=DEFAULT_SERVER_NUMBER, show_default=True)
@click.option("--wall-clock", is_flag=True, help="Pace emissions in real time instead of a simulated clock.")
@_handle_errors
def run_mobile(trace_path: str, gateway: str, user: str, interval_ms: int,
               server_number: str, wall_clock: bool) -> None:
    """Replay a GPS trace through the mobile assembly into an SMS gateway."""
    trace = load_trace(trace_path)
    asm = build_mobile_assembly(
        trace,
        interval_ms,
        user,
        resolve_gateway(gateway),
        server_number=server_number,
        clock="wall" if wall_clock else "simulated",
    )
    asm.start()
    if wall_clock:
        time.sleep(interval_ms / 1000.0 * max(1, len(trace)))
    asm.stop()
    click.echo(f"sent {len(trace)} fixes as {user}")


@main.command("run-server")
@click.option("--gateway", required=True, help="Gateway spec, e.g. tcp-listen://127.0.0.1:7070.")
@click.option("--inbox", required=True, type=click.Path(file_okay=False),
              help="Directory that receives one date-stamped XML file per message.")
@click.option("--own-number", default=DEFAULT_SERVER_NUMBER, show_default=True)
@click.option("--expect-messages", default=None, type=int,
              help="Exit once this many files have been written.")
@click.option("--timeout", default=None, type=float, help="Give up after this many seconds.")
@_handle_errors
def run_server(gateway: str, inbox: str, own_number: str,
               expect_messages: int | None, timeout: float | None) -> None:
    """Receive SMS location reports and store them as date-stamped XML files."""
    inbox_dir = Path(inbox)
    inbox_dir.mkdir(parents=True, exist_ok=True)
    asm = build_server_assembly(resolve_gateway(gateway), inbox_dir, own_number=own_number)
    asm.start()

    def file_count() -> int:
        return sum(1 for p in inbox_dir.iterdir() if p.is_file() and not p.name.startswith("."))

    started = time.monotonic()
    try:
        while True:
            if expect_messages is not None and file_count() >= expect_messages:
                break
            if timeout is not None and time.monotonic() - started > timeout:
                if expect_messages is not None:
                    click.echo(f"timeout: {file_count()}/{expect_messages} messages", err=True)
                    asm.stop()
                    sys.exit(EXIT_VALIDATION)
                break
            time.sleep(0.05)
    except KeyboardInterrupt:
        pass
    asm.stop()
    click.echo(f"stored {file_count()} messages in {inbox_dir}")


@main.command()
@click.option("--dir", "data_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Data directory (containing inbox/).")
@click.option("--once", "mode", flag_value="once", default=True)
@click.option("--watch", "mode", flag_value="watch")
@click.option("--poll-ms", default=500, show_default=True, type=int)
@_handle_errors
def ingest(data_dir: str, mode: str, poll_ms: int) -> None:
    """Ingest inbox files into the store (move to loaded/ or quarantine/)."""
    store, _services = _open_services(Path(data_dir))
    watcher = InboxWatcher(store, poll_interval_s=poll_ms / 1000.0)
    if mode == "once":
        reports = watcher.poll_once()
        loaded = sum(1 for r in reports if r.outcome.value == "LOADED")
        click.echo(f"ingested {loaded} loaded, {len(reports) - loaded} quarantined")
        return
    click.echo(f"watching {store.inbox_dir} (Ctrl-C to stop)")
    try:
        watcher.start()
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        watcher.stop()


@main.group()
def query() -> None:
    """Query the store; prints JSON."""


def _query_options(fn):
    fn = click.option("--data-dir", default=None,
                      help="Data directory (default: $GLOSS_DATA_DIR or ./gloss-data).")(fn)
    return fn


@query.command()
@click.argument("user")
@_query_options
@_handle_errors
def location(user: str, data_dir: str | None) -> None:
    """Most recent known location for USER."""
    _store, services = _open_services(_data_dir(data_dir))
    located = services.locate_user(user)
    if located is None:
        click.echo("no known location", err=True)
        sys.exit(EXIT_VALIDATION)
    event, placement = located
    body = {
        "user": event.user,
        "lat": event.position.lat,
        "lon": event.position.lon,
        "timestamp": event.timestamp.isoformat(timespec="milliseconds").replace("+00:00", "Z"),
    }
    if placement is not None:
        body["map"] = {"image_id": placement.image_id, "x": placement.x, "y": placement.y}
    click.echo(json.dumps(body, indent=2))


@query.command()
@click.argument("user")
@click.option("--from", "from_raw", default=None, help="Inclusive ISO-8601 lower bound.")
@click.option("--to", "to_raw", default=None, help="Inclusive ISO-8601 upper bound.")
@_query_options
@_handle_errors
def trail(user: str, from_raw: str | None, to_raw: str | None, data_dir: str | None) -> None:
    """Time-ordered locations for USER."""
    store, _services = _open_services(_data_dir(data_dir))
    from_time = parse_timestamp(from_raw) if from_raw else None
    to_time = parse_timestamp(to_raw) if to_raw else None
    events = store.trail(user, from_time, to_time)
    click.echo(json.dumps([
        {
            "lat": e.position.lat,
            "lon": e.position.lon,
            "timestamp": e.timestamp.isoformat(timespec="milliseconds").replace("+00:00", "Z"),
        }
        for e in events
    ], indent=2))


@query.command()
@click.option("--lat", required=True, type=float)
@click.option("--lon", required=True, type=float)
@click.option("--radius", required=True, type=float, help="Meters.")
@click.option("--category", default=None)
@_query_options
@_handle_errors
def smarttown(lat: float, lon: float, radius: float, category: str | None, data_dir: str | None) -> None:
    """Facilities near a position, ranked by distance."""
    from .transports import LatLongCoordinate

    _store, services = _open_services(_data_dir(data_dir))
    result = services.smart_town(LatLongCoordinate(lat, lon), radius, category)
    click.echo(json.dumps([
        {
            "id": e.facility.id,
            "name": e.facility.name,
            "category": e.facility.category,
            "distance_m": e.distance_m,
            "prev": e.prev_id,
            "next": e.next_id,
        }
        for e in result.entries
    ], indent=2))


@query.command()
@click.argument("user")
@click.option("--radius", required=True, type=float, help="Meters.")
@_query_options
@_handle_errors
def radar(user: str, radius: float, data_dir: str | None) -> None:
    """Nearby landmarks, facilities and visible users relative to USER."""
    _store, services = _open_services(_data_dir(data_dir))
    entries = services.radar(user, radius)
    click.echo(json.dumps([
        {
            "kind": e.kind.value,
            "id": e.id,
            "name": e.name,
            "distance_m": e.distance_m,
            "bearing_deg": e.bearing_deg,
        }
        for e in entries
    ], indent=2))


@main.command()
@click.option("--topology", "topology_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workload", "workload_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", type=click.Choice(["flood", "geo"]), default="flood", show_default=True)
@click.option("--ttl", default=8, show_default=True, type=int, help="Hop budget for the flood policy.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--horizon", "horizon_ms", default=None, type=int, help="Stop the clock at this time (ms).")
@click.option("-o", "--out", "json_out", default=None, type=click.Path(dir_okay=False),
              help="Write JSON metrics to a file.")
@click.option("--csv", "csv_out", default=None, type=click.Path(dir_okay=False),
              help="Write per-delivery CSV to a file.")
@_handle_errors
def simulate(topology_path: str, workload_path: str, policy: str, ttl: int, seed: int,
             horizon_ms: int | None, json_out: str | None, csv_out: str | None) -> None:
    """Run one deterministic overlay simulation and print its metrics."""
    spec = load_topology(topology_path)
    workload = load_workload(workload_path)
    routing = flood_policy(ttl) if policy == "flood" else geo_greedy_policy()
    metrics = run_sim(spec, workload, routing, seed, horizon_ms=horizon_ms)
    text = emit_metrics(metrics, "json")
    if json_out:
        Path(json_out).write_text(text + "\n", encoding="utf-8")
    if csv_out:
        Path(csv_out).write_text(emit_metrics(metrics, "csv"), encoding="utf-8")
    click.echo(text)


if __name__ == "__main__":
    main()
