"""User-facing service logic over the store: geodesy, map placement,
trail rendering, smart town, hearsay geofence delivery, and radar.

All geometry is spherical (mean radius 6,371,008.8 m) and all map
calibrations are linear (equirectangular) between pixel and lat/lon, so
every projection has an exact inverse.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable

from .errors import (
    CoincidentPoints,
    EmptyTrail,
    IoFailure,
    NoKnownLocation,
    NoMapConfigured,
    ParseFailure,
    RangeViolation,
)
from .store import Facility, GlossStore, Hearsay
from .transports import LatLongCoordinate, LocationEvent

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_008.8


# --- geodesy ----------------------------------------------------------------

def haversine_m(a: LatLongCoordinate, b: LatLongCoordinate) -> float:
    """Great-circle distance in meters on the mean-radius sphere."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def bearing_deg(a: LatLongCoordinate, b: LatLongCoordinate) -> float:
    """Initial great-circle bearing from a to b; 0 = north, 90 = east."""
    if a.lat == b.lat and a.lon == b.lon:
        raise CoincidentPoints("bearing is undefined between coincident points")
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    deg = math.degrees(math.atan2(y, x)) % 360.0
    return 0.0 if deg >= 360.0 else deg  # tiny negatives mod 360 round to 360.0


def _meters_to_lat_degrees(meters: float) -> float:
    return math.degrees(meters / EARTH_RADIUS_M)


def _meters_to_lon_degrees(meters: float, at_lat: float) -> float:
    scale = math.cos(math.radians(at_lat))
    if scale < 1e-9:
        return 360.0  # polar degenerate: any span covers all longitudes
    return math.degrees(meters / (EARTH_RADIUS_M * scale))


# --- calibrated maps -----------------------------------------------------------

@dataclass(frozen=True)
class MapCalibration:
    """Static map image with a linear pixel <-> lat/lon mapping."""

    image_id: str
    pixel_width: int
    pixel_height: int
    north_lat: float
    south_lat: float
    west_lon: float
    east_lon: float

    def __post_init__(self) -> None:
        if self.pixel_width <= 0 or self.pixel_height <= 0:
            raise RangeViolation(f"map {self.image_id}: pixel dimensions must be positive")
        if not self.north_lat > self.south_lat:
            raise RangeViolation(f"map {self.image_id}: north_lat must exceed south_lat")
        if self.west_lon == self.east_lon:
            raise RangeViolation(f"map {self.image_id}: west_lon equals east_lon")

    @property
    def area_deg2(self) -> float:
        return (self.north_lat - self.south_lat) * abs(self.east_lon - self.west_lon)

    def contains(self, point: LatLongCoordinate) -> bool:
        lon_lo, lon_hi = sorted((self.west_lon, self.east_lon))
        return self.south_lat <= point.lat <= self.north_lat and lon_lo <= point.lon <= lon_hi

    def contains_bbox(self, south: float, west: float, north: float, east: float) -> bool:
        lon_lo, lon_hi = sorted((self.west_lon, self.east_lon))
        return self.south_lat <= south and north <= self.north_lat and lon_lo <= west and east <= lon_hi

    def project(self, point: LatLongCoordinate) -> tuple[int, int]:
        """Lat/lon to pixel (x right, y down), rounded and clamped to bounds."""
        x = (point.lon - self.west_lon) / (self.east_lon - self.west_lon) * self.pixel_width
        y = (self.north_lat - point.lat) / (self.north_lat - self.south_lat) * self.pixel_height
        return (
            min(self.pixel_width, max(0, round(x))),
            min(self.pixel_height, max(0, round(y))),
        )

    def unproject(self, x: float, y: float) -> LatLongCoordinate:
        lon = self.west_lon + x / self.pixel_width * (self.east_lon - self.west_lon)
        lat = self.north_lat - y / self.pixel_height * (self.north_lat - self.south_lat)
        return LatLongCoordinate(lat, lon)


def load_maps(path: str | Path) -> list[MapCalibration]:
    """maps.jsonl: one calibration object per line."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    maps = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            maps.append(
                MapCalibration(
                    image_id=str(obj["image_id"]),
                    pixel_width=int(obj["pixel_width"]),
                    pixel_height=int(obj["pixel_height"]),
                    north_lat=float(obj["north_lat"]),
                    south_lat=float(obj["south_lat"]),
                    west_lon=float(obj["west_lon"]),
                    east_lon=float(obj["east_lon"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, RangeViolation) as exc:
            raise ParseFailure(f"{path}:{lineno}: {exc}") from exc
    return maps


# --- result shapes ----------------------------------------------------------------

@dataclass(frozen=True)
class MapPlacement:
    image_id: str
    x: int
    y: int


@dataclass(frozen=True)
class TrailView:
    points: list[tuple[int, int]]
    bbox: tuple[float, float, float, float]  # (south, west, north, east)
    map: MapCalibration


@dataclass(frozen=True)
class SmartTownEntry:
    facility: Facility
    distance_m: float
    prev_id: str | None
    next_id: str | None


@dataclass(frozen=True)
class SmartTownResult:
    entries: list[SmartTownEntry]


class RadarKind(enum.Enum):
    LANDMARK = "LANDMARK"
    FACILITY = "FACILITY"
    USER = "USER"


_RADAR_KIND_ORDER = {RadarKind.LANDMARK: 0, RadarKind.FACILITY: 1, RadarKind.USER: 2}


@dataclass(frozen=True)
class RadarEntry:
    kind: RadarKind
    id: str
    name: str
    distance_m: float
    bearing_deg: float


# --- services facade ---------------------------------------------------------------------

class LocationServices:
    """Query logic over a store snapshot plus the calibrated map set."""

    def __init__(self, store: GlossStore, maps: Iterable[MapCalibration] = ()):
        self.store = store
        self.maps = list(maps)

    def attach_hearsay_delivery(self) -> None:
        """Run the hearsay geofence check on every ingested location event."""
        self.store.event_listeners.append(self._on_event)

    def _on_event(self, event: LocationEvent) -> None:
        delivered = self.hearsay_check(event)
        for item in delivered:
            log.info("hearsay %s delivered to %s", item.id, event.user)

    # -- maps

    def best_map_for_point(self, point: LatLongCoordinate) -> MapCalibration | None:
        candidates = [m for m in self.maps if m.contains(point)]
        if not candidates:
            return None
        return min(candidates, key=lambda m: (m.area_deg2, m.image_id))

    def placement(self, point: LatLongCoordinate) -> MapPlacement | None:
        best = self.best_map_for_point(point)
        if best is None:
            return None
        x, y = best.project(point)
        return MapPlacement(best.image_id, x, y)

    # -- queries

    def locate_user(self, user: str) -> tuple[LocationEvent, MapPlacement | None] | None:
        event = self.store.latest_location(user)
        if event is None:
            return None
        return event, self.placement(event.position)

    def render_trail(
        self,
        user: str,
        from_time: datetime | None = None,
        to_time: datetime | None = None,
    ) -> TrailView:
        """Project a user's trail onto the smallest map containing its padded
        bounding box (or the largest map when none contains it)."""
        events = self.store.trail(user, from_time, to_time)
        if not events:
            raise EmptyTrail(user)
        if not self.maps:
            raise NoMapConfigured("no calibrated maps loaded")
        lats = [e.position.lat for e in events]
        lons = [e.position.lon for e in events]
        south, north = min(lats), max(lats)
        west, east = min(lons), max(lons)
        mid_lat = (south + north) / 2
        # pad 10% per side, never less than a 100 m half-span per axis
        lat_pad = max(0.1 * (north - south), _meters_to_lat_degrees(100.0))
        lon_pad = max(0.1 * (east - west), _meters_to_lon_degrees(100.0, mid_lat))
        bbox = (
            max(-90.0, south - lat_pad),
            max(-180.0, west - lon_pad),
            min(90.0, north + lat_pad),
            min(180.0, east + lon_pad),
        )
        containing = [m for m in self.maps if m.contains_bbox(*bbox)]
        if containing:
            chosen = min(containing, key=lambda m: (m.area_deg2, m.image_id))
        else:
            chosen = max(self.maps, key=lambda m: (m.area_deg2, m.image_id))
        points = [chosen.project(e.position) for e in events]
        return TrailView(points=points, bbox=bbox, map=chosen)

    def smart_town(
        self,
        position: LatLongCoordinate,
        radius_m: float,
        category: str | None = None,
    ) -> SmartTownResult:
        """Facilities within radius (inclusive), optionally category-filtered,
        ranked by distance with prev/next navigation links."""
        if radius_m <= 0:
            raise RangeViolation("radius must be positive")
        ranked = sorted(
            (
                (haversine_m(position, f.position), f)
                for f in self.store.facilities
                if category is None or f.category == category
            ),
            key=lambda pair: (pair[0], pair[1].id),
        )
        within = [(d, f) for d, f in ranked if d <= radius_m]
        entries = []
        for i, (d, f) in enumerate(within):
            entries.append(
                SmartTownEntry(
                    facility=f,
                    distance_m=d,
                    prev_id=within[i - 1][1].id if i > 0 else None,
                    next_id=within[i + 1][1].id if i + 1 < len(within) else None,
                )
            )
        return SmartTownResult(entries=entries)

    def hearsay_check(self, event: LocationEvent) -> list[Hearsay]:
        """Deliver every hearsay item whose geofence contains the event, at
        most once per (user, item) for all time."""
        delivered = []
        for item in self.store.hearsay_items:
            if not item.admits(event.user):
                continue
            if haversine_m(event.position, item.region_center) > item.region_radius_m:
                continue
            if self.store.mark_delivered(event.user, item.id):
                delivered.append(item)
        return delivered

    def radar(self, user: str, radius_m: float) -> list[RadarEntry]:
        """Landmarks, facilities and visible users within radius of the
        user's latest position, with distance and bearing."""
        if radius_m <= 0:
            raise RangeViolation("radius must be positive")
        latest = self.store.latest_location(user)
        if latest is None:
            raise NoKnownLocation(user)
        origin = latest.position

        entries: list[RadarEntry] = []

        def add(kind: RadarKind, entity_id: str, name: str, position: LatLongCoordinate) -> None:
            d = haversine_m(origin, position)
            if d > radius_m:
                return
            try:
                b = bearing_deg(origin, position)
            except CoincidentPoints:
                b = 0.0
            entries.append(RadarEntry(kind, entity_id, name, d, b))

        for lm in self.store.landmarks:
            add(RadarKind.LANDMARK, lm.id, lm.name, lm.position)
        for f in self.store.facilities:
            add(RadarKind.FACILITY, f.id, f.name, f.position)
        for other in self.store.users():
            if other == user or not self.store.can_observe(user, other):
                continue
            other_latest = self.store.latest_location(other)
            if other_latest is not None:
                add(RadarKind.USER, other, other, other_latest.position)

        entries.sort(key=lambda e: (e.distance_m, _RADAR_KIND_ORDER[e.kind], e.id))
        return entries
