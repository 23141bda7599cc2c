"""Server-side knowledge base.

Watches an inbox directory for location-event XML files, loads them into an
in-memory object graph, and answers raw retrieval queries (latest location,
trail slices). The file system is the durable log: ingested files move to
``loaded/`` and the graph is rebuilt by re-ingesting them at startup;
unparseable files move to ``quarantine/`` with a reason.
"""

from __future__ import annotations

import enum
import json
import logging
import shutil
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    CodecFailure,
    InvalidRange,
    IoFailure,
    ParseFailure,
    RangeViolation,
    SchemaViolation,
    UnknownHearsay,
)
from .transports import LatLongCoordinate, LocationEvent, validate_user_id, xml_decode

log = logging.getLogger(__name__)

AUDIENCE_ALL = "*"


@dataclass(frozen=True)
class Facility:
    id: str
    name: str
    category: str
    position: LatLongCoordinate
    info: str = ""


@dataclass(frozen=True)
class Landmark:
    id: str
    name: str
    position: LatLongCoordinate


@dataclass(frozen=True)
class Hearsay:
    id: str
    author: str
    region_center: LatLongCoordinate
    region_radius_m: float
    message: str
    audience: frozenset[str]  # {"*"} means everyone

    def __post_init__(self) -> None:
        if not self.region_radius_m > 0:
            raise RangeViolation(f"hearsay {self.id}: radius must be positive")

    def admits(self, user: str) -> bool:
        return AUDIENCE_ALL in self.audience or user in self.audience


class IngestOutcome(enum.Enum):
    LOADED = "LOADED"
    QUARANTINED = "QUARANTINED"


@dataclass(frozen=True)
class IngestReport:
    path: Path
    outcome: IngestOutcome
    reason: str = ""


@dataclass(frozen=True)
class KnowledgeCounts:
    facilities: int
    landmarks: int
    hearsay: int
    visibility: int


@dataclass
class _UserEvents:
    # kept sorted by (timestamp, ingest sequence)
    events: list[tuple[LocationEvent, int]] = field(default_factory=list)


class GlossStore:
    """Object graph plus the inbox/loaded/quarantine directory trio.

    One writer (the ingest path), many readers; a single lock makes each
    ingest invisible until complete and knowledge reloads atomic.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.inbox_dir = self.data_dir / "inbox"
        self.loaded_dir = self.data_dir / "loaded"
        self.quarantine_dir = self.data_dir / "quarantine"
        for d in (self.inbox_dir, self.loaded_dir, self.quarantine_dir):
            d.mkdir(parents=True, exist_ok=True)

        self._lock = threading.RLock()
        self._users: dict[str, _UserEvents] = {}
        self._seen_filenames: set[str] = set()
        self._ingest_seq = 0
        self.facilities: list[Facility] = []
        self.landmarks: list[Landmark] = []
        self.hearsay_items: list[Hearsay] = []
        self.visibility: dict[str, frozenset[str]] = {}
        self._delivered: set[tuple[str, str]] = set()
        self.event_listeners: list[Callable[[LocationEvent], None]] = []

    # -- events

    def record_event(self, event: LocationEvent) -> None:
        """Insert an event into the graph and fire ingest listeners."""
        with self._lock:
            self._ingest_seq += 1
            entry = (event, self._ingest_seq)
            bucket = self._users.setdefault(event.user, _UserEvents())
            bucket.events.append(entry)
            # ingest order already breaks timestamp ties; sort keeps the
            # per-user list ordered when files arrive out of timestamp order
            bucket.events.sort(key=lambda e: (e[0].timestamp, e[1]))
        for listener in list(self.event_listeners):
            try:
                listener(event)
            except Exception:
                log.exception("event listener failed")

    def event_count(self) -> int:
        with self._lock:
            return sum(len(u.events) for u in self._users.values())

    def users(self) -> list[str]:
        with self._lock:
            return sorted(self._users)

    def latest_location(self, user: str) -> LocationEvent | None:
        with self._lock:
            bucket = self._users.get(user)
            if bucket is None or not bucket.events:
                return None
            return bucket.events[-1][0]

    def trail(
        self,
        user: str,
        from_time: datetime | None = None,
        to_time: datetime | None = None,
    ) -> list[LocationEvent]:
        """Events with from_time <= timestamp <= to_time (bounds inclusive,
        None = open) in (timestamp, ingest sequence) order."""
        if from_time is not None and to_time is not None and from_time > to_time:
            raise InvalidRange(f"from {from_time.isoformat()} > to {to_time.isoformat()}")
        with self._lock:
            bucket = self._users.get(user)
            if bucket is None:
                return []
            return [
                ev
                for ev, _seq in bucket.events
                if (from_time is None or ev.timestamp >= from_time)
                and (to_time is None or ev.timestamp <= to_time)
            ]

    # -- ingest

    def ingest_file(self, path: str | Path) -> IngestReport:
        """Load one XML file into the graph, then move it to loaded/ (valid)
        or quarantine/ (invalid). Idempotent per filename."""
        path = Path(path)
        name = path.name
        with self._lock:
            if name in self._seen_filenames:
                # drain re-dropped duplicates from the inbox; the first copy
                # in loaded/ stays the durable record
                if path.parent == self.inbox_dir:
                    path.unlink(missing_ok=True)
                return IngestReport(path, IngestOutcome.LOADED, reason="duplicate")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        try:
            event = xml_decode(text)
        except CodecFailure as exc:
            self._move(path, self.quarantine_dir)
            with self._lock:
                self._seen_filenames.add(name)
            return IngestReport(path, IngestOutcome.QUARANTINED, reason=str(exc))
        with self._lock:
            self._seen_filenames.add(name)
        self.record_event(event)
        self._move(path, self.loaded_dir)
        return IngestReport(path, IngestOutcome.LOADED)

    def _move(self, path: Path, target_dir: Path) -> None:
        try:
            if path.parent != target_dir:
                shutil.move(str(path), str(target_dir / path.name))
        except OSError as exc:
            raise IoFailure(f"cannot move {path} to {target_dir}: {exc}") from exc

    def rebuild_from_loaded(self) -> int:
        """Re-ingest loaded/ in filename order (the durable log) at startup."""
        count = 0
        for path in sorted(self.loaded_dir.iterdir()):
            if path.name.startswith(".") or not path.is_file():
                continue
            report = self.ingest_file(path)
            if report.outcome is IngestOutcome.LOADED and report.reason != "duplicate":
                count += 1
        return count

    # -- knowledge tables

    def load_knowledge(
        self,
        facilities_file: str | Path | None,
        landmarks_file: str | Path | None,
        hearsay_file: str | Path | None,
        visibility_file: str | Path | None,
    ) -> KnowledgeCounts:
        """Replace the knowledge tables atomically; on any parse failure the
        previous tables are retained. A None path replaces with empty."""
        facilities = list(_parse_jsonl(facilities_file, _parse_facility))
        landmarks = list(_parse_jsonl(landmarks_file, _parse_landmark))
        hearsay = list(_parse_jsonl(hearsay_file, _parse_hearsay))
        visibility = dict(_parse_jsonl(visibility_file, _parse_visibility))
        with self._lock:
            self.facilities = facilities
            self.landmarks = landmarks
            self.hearsay_items = hearsay
            self.visibility = visibility
        return KnowledgeCounts(len(facilities), len(landmarks), len(hearsay), len(visibility))

    def hearsay_by_id(self, hearsay_id: str) -> Hearsay | None:
        with self._lock:
            for item in self.hearsay_items:
                if item.id == hearsay_id:
                    return item
        return None

    def mark_delivered(self, user: str, hearsay_id: str) -> bool:
        """Record a hearsay delivery; True iff this (user, item) pair is new."""
        with self._lock:
            if self.hearsay_by_id(hearsay_id) is None:
                raise UnknownHearsay(hearsay_id)
            key = (user, hearsay_id)
            if key in self._delivered:
                return False
            self._delivered.add(key)
            return True

    def can_observe(self, observer: str, target: str) -> bool:
        """Visibility rule: absence means private; "*" grants everyone."""
        with self._lock:
            observers = self.visibility.get(target, frozenset())
        return AUDIENCE_ALL in observers or observer in observers


# --- knowledge file parsing ----------------------------------------------------

def _parse_jsonl(path: str | Path | None, parse_line: Callable[[dict], object]) -> Iterable:
    if path is None:
        return []
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    out = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            out.append(parse_line(obj))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, SchemaViolation, RangeViolation) as exc:
            raise ParseFailure(f"{path}:{lineno}: {exc}") from exc
    return out


def _parse_facility(obj: dict) -> Facility:
    return Facility(
        id=str(obj["id"]),
        name=str(obj["name"]),
        category=str(obj["category"]),
        position=LatLongCoordinate(float(obj["lat"]), float(obj["lon"])),
        info=str(obj.get("info", "")),
    )


def _parse_landmark(obj: dict) -> Landmark:
    return Landmark(
        id=str(obj["id"]),
        name=str(obj["name"]),
        position=LatLongCoordinate(float(obj["lat"]), float(obj["lon"])),
    )


def _parse_hearsay(obj: dict) -> Hearsay:
    audience = obj["audience"]
    if not isinstance(audience, list) or not audience:
        raise ValueError("audience must be a non-empty list")
    members = frozenset(
        a if a == AUDIENCE_ALL else validate_user_id(str(a)) for a in audience
    )
    return Hearsay(
        id=str(obj["id"]),
        author=validate_user_id(str(obj["author"])),
        region_center=LatLongCoordinate(float(obj["lat"]), float(obj["lon"])),
        region_radius_m=float(obj["radius_m"]),
        message=str(obj["message"]),
        audience=members,
    )


def _parse_visibility(obj: dict) -> tuple[str, frozenset[str]]:
    observers = obj["observers"]
    if not isinstance(observers, list):
        raise ValueError("observers must be a list")
    members = frozenset(
        o if o == AUDIENCE_ALL else validate_user_id(str(o)) for o in observers
    )
    return validate_user_id(str(obj["user"])), members


# --- directory watcher ----------------------------------------------------------

class InboxWatcher:
    """Poll-based watcher: every file that appears in the inbox is ingested
    exactly once, in lexicographic filename order per poll."""

    def __init__(self, store: GlossStore, poll_interval_s: float = 0.5):
        self.store = store
        self.poll_interval_s = poll_interval_s
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.reports: list[IngestReport] = []

    def poll_once(self) -> list[IngestReport]:
        reports = []
        try:
            paths = sorted(
                p for p in self.store.inbox_dir.iterdir()
                if p.is_file() and not p.name.startswith(".")
            )
        except OSError as exc:
            log.warning("watcher: cannot list inbox: %s", exc)
            return []
        for path in paths:
            try:
                reports.append(self.store.ingest_file(path))
            except IoFailure as exc:
                log.warning("watcher: %s", exc)
        self.reports.extend(reports)
        return reports

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.is_set():
            self.poll_once()
            self._stop.wait(self.poll_interval_s)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def wait_for_events(self, store_count: int, timeout_s: float = 10.0) -> bool:
        """Convenience for callers that need ingestion to catch up."""
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if self.store.event_count() >= store_count:
                return True
            time.sleep(0.01)
        return self.store.event_count() >= store_count
