"""Small test components and builders shared across the suite."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

from gloss.pipeline import Component, Event, EventKind
from gloss.transports import GpsFix, LatLongCoordinate, LocationEvent

BASE_TIME = datetime(2002, 9, 1, 12, 0, 0, tzinfo=timezone.utc)


class Probe(Component):
    """Sink that records everything it receives, both kinds."""

    catalog_kind = "probe"
    plug_kinds = frozenset({EventKind.TEXT, EventKind.RECORD})

    def __init__(self, component_id: str):
        super().__init__(component_id)
        self.received: list[Event] = []

    def handle_text(self, event: Event) -> None:
        self.received.append(event)

    def handle_record(self, event: Event) -> None:
        self.received.append(event)


class ManualSource(Component):
    """Source with a single socket of the given kind, driven by tests."""

    catalog_kind = "manual_source"

    def __init__(self, component_id: str, kind: EventKind):
        super().__init__(component_id)
        self.socket_kinds = frozenset({kind})

    def send(self, event: Event) -> None:
        self.emit(event)


class Relay(Component):
    """Passes every event through unchanged (same kind in and out)."""

    catalog_kind = "relay"

    def __init__(self, component_id: str, kind: EventKind):
        super().__init__(component_id)
        self.plug_kinds = frozenset({kind})
        self.socket_kinds = frozenset({kind})

    def handle_text(self, event: Event) -> None:
        self.emit(event)

    def handle_record(self, event: Event) -> None:
        self.emit(event)


def coord(lat: float, lon: float) -> LatLongCoordinate:
    return LatLongCoordinate(lat, lon)


def location_event(user: str = "+447700900123", lat: float = 56.34020, lon: float = -2.79550,
                   at: datetime = BASE_TIME) -> LocationEvent:
    return LocationEvent(user=user, position=coord(lat, lon), timestamp=at)


def make_trace(n: int, start_lat: float = 56.0, start_lon: float = -2.0,
               step: float = 0.001) -> list[GpsFix]:
    """n fixes in a straight line; coordinates stay on the 5-decimal grid."""
    fixes = []
    for i in range(n):
        fixes.append(
            GpsFix(
                position=coord(round(start_lat + i * step, 5), round(start_lon + i * step, 5)),
                fix_time=BASE_TIME + timedelta(seconds=i),
            )
        )
    return fixes
