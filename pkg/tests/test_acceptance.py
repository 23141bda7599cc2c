"""Acceptance suite: one test per criterion, each printing a pass line and
holding to its stated time budget.

Run with `pytest tests/test_acceptance.py -v -s` to see the pass lines.
"""

from __future__ import annotations

import random
import string
import time
from contextlib import contextmanager
from datetime import timedelta, timezone, datetime

import pytest
from fastapi.testclient import TestClient

from gloss.api import create_app
from gloss.catalog import BuildContext, instantiate_spec
from gloss.errors import CodecFailure, GlossError
from gloss.pipeline import Assembly, EventBus, EventKind, RecordEvent, bus_put
from gloss.services import LocationServices, haversine_m
from gloss.sim import SimMessage, emit_metrics, flood_policy, run as run_sim, topology_from_dict
from gloss.store import Facility, GlossStore, Hearsay, InboxWatcher, Landmark
from gloss.transports import (
    LocationEvent,
    LoopbackGateway,
    build_mobile_assembly,
    build_server_assembly,
    format_segment,
    sms_reassemble,
    sms_split,
    xml_decode,
    xml_encode,
)

from .helpers import BASE_TIME, Probe, coord, location_event, make_trace
from .reference_sim import connected_graphs, flood_reference

USER = "+447700900123"


@contextmanager
def budget(criterion: str, seconds: float):
    started = time.perf_counter()
    yield
    elapsed = time.perf_counter() - started
    assert elapsed < seconds, f"{criterion} exceeded its {seconds}s budget ({elapsed:.1f}s)"
    print(f"[PASS] {criterion} ({elapsed:.2f}s)")


def test_a1_end_to_end_pipeline(tmp_path):
    with budget("A1 end-to-end pipeline", 10.0):
        store = GlossStore(tmp_path)
        gateway = LoopbackGateway()
        trace = make_trace(10)
        server = build_server_assembly(gateway, store.inbox_dir)
        mobile = build_mobile_assembly(trace, 1000, USER, gateway)
        server.start()
        mobile.start()
        mobile.stop()
        server.stop()
        InboxWatcher(store).poll_once()

        latest = store.latest_location(USER)
        assert latest is not None
        assert (latest.position.lat, latest.position.lon) == (
            trace[-1].position.lat,
            trace[-1].position.lon,
        )
        trail = store.trail(USER)
        assert len(trail) == 10
        assert [e.position for e in trail] == [f.position for f in trace]
        stamps = [e.timestamp for e in trail]
        assert stamps == sorted(stamps)


def test_a2_segmentation_property():
    with budget("A2 segmentation property", 5.0):
        rng = random.Random(20020901)
        alphabet = [chr(c) for c in range(128)]
        for i in range(1000):
            text = "".join(rng.choices(alphabet, k=rng.randrange(0, 2001)))
            segments = sms_split(text, f"{rng.randrange(16**8):08x}")
            assert all(len(format_segment(s)) <= 160 for s in segments)
            rng.shuffle(segments)
            assert sms_reassemble(segments) == text


MALFORMED_CORPUS = [
    "hello",
    "",
    "   ",
    "<locationEvent/>",
    "<locationEvent><user/><position/><timestamp/></locationEvent>",
    '<wrongRoot><user id="+447700900123"/></wrongRoot>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-2.0"/></locationEvent>',
    '<locationEvent><position lat="56.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="bob"/><position lat="56.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+44"/><position lat="56.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="91.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-ie81.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="181.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="NaN" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-2.0"/><timestamp>not-a-time</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-2.0"/><timestamp>1969-12-31T23:59:59.000Z</timestamp></locationEvent>',
    '<locationEvent><user id="+447700900123"/><position lat="56.0" lon="-2.0"/><timestamp>2002-09-01T12:00:00.000Z</timestamp>',
    "<locationEvent><user id='+447700900123'/><position lat='56.0'/><timestamp>2002-09-01T12:00:00.000Z</timestamp></locationEvent>",
    "\x00\x01\x02 binary junk",
]


def test_a3_codec_property(tmp_path):
    with budget("A3 codec property", 5.0):
        rng = random.Random(42)
        for _ in range(1000):
            event = LocationEvent(
                user="+" + "".join(rng.choices(string.digits, k=rng.randrange(7, 16))),
                position=coord(rng.randrange(-9000000, 9000001) / 1e5,
                               rng.randrange(-18000000, 18000001) / 1e5),
                timestamp=datetime(1970, 1, 1, tzinfo=timezone.utc)
                + timedelta(milliseconds=rng.randrange(0, 4_000_000_000_000)),
            )
            assert xml_decode(xml_encode(event)) == event

        assert len(MALFORMED_CORPUS) == 20
        store = GlossStore(tmp_path)
        for i, text in enumerate(MALFORMED_CORPUS):
            with pytest.raises(CodecFailure):  # MalformedXml/SchemaViolation/RangeViolation
                xml_decode(text)
            path = store.inbox_dir / f"bad{i:02d}.xml"
            path.write_text(text, encoding="utf-8")
            report = store.ingest_file(path)
            assert report.outcome.value == "QUARANTINED"
        assert store.event_count() == 0


def test_a4_event_bus_fanout():
    with budget("A4 event-bus fan-out", 1.0):
        for n in (0, 1, 5):
            asm = Assembly(f"bus{n}")
            bus = asm.add(EventBus("bus"))
            probes = []
            for i in range(n):
                p = asm.add(Probe(f"p{i}"))
                asm.connect(bus.socket(EventKind.RECORD), p.plug(EventKind.RECORD))
                probes.append(p)
            asm.start()
            events = [RecordEvent(location_event(at=BASE_TIME + timedelta(seconds=i)))
                      for i in range(100)]
            for e in events:
                bus_put(bus, e)
            assert sum(len(p.received) for p in probes) == n * 100
            for p in probes:
                assert [e.payload for e in p.received] == [e.payload for e in events]


def test_a5_geodesy():
    with budget("A5 geodesy", 1.0):
        # oracle distances fixed before the build (independent calculator)
        city_pairs = [
            ((56.3398, -2.7967), (56.4620, -2.9707), 17299.3810474),
            ((51.5074, -0.1278), (48.8566, 2.3522), 343556.534881),
            ((40.7128, -74.0060), (34.0522, -118.2437), 3935751.69089),
            ((35.6762, 139.6503), (-33.8688, 151.2093), 7825829.426),
            ((55.9533, -3.1883), (55.8642, -4.2518), 67019.603449),
        ]
        for a, b, expected in city_pairs:
            d = haversine_m(coord(*a), coord(*b))
            assert abs(d - expected) / expected < 0.001
            assert haversine_m(coord(*b), coord(*a)) == d  # symmetry exact
        p = coord(12.34567, -76.54321)
        assert haversine_m(p, p) == 0.0
        equator_degree = haversine_m(coord(0, 0), coord(0, 1))
        assert abs(equator_degree - 111195.080234) / 111195.080234 < 0.0001


def test_a6_hearsay_at_most_once(tmp_path):
    with budget("A6 hearsay at-most-once", 10.0):
        rng = random.Random(66)
        for walk in range(100):
            store = GlossStore(tmp_path / f"w{walk}")
            regions = [
                Hearsay(id=f"h{i}", author="+440000000099",
                        region_center=coord(rng.uniform(55.95, 56.05), rng.uniform(-2.05, -1.95)),
                        region_radius_m=rng.uniform(200, 4000), message="m",
                        audience=frozenset({"*"}))
                for i in range(10)
            ]
            store.hearsay_items = regions
            services = LocationServices(store)
            delivered_log = []
            oracle_log = []
            oracle_seen: set[str] = set()
            for step in range(20):
                pos = coord(round(rng.uniform(55.95, 56.05), 5), round(rng.uniform(-2.05, -1.95), 5))
                ev = location_event(user=USER, lat=pos.lat, lon=pos.lon,
                                    at=BASE_TIME + timedelta(seconds=step))
                delivered_log.extend((step, h.id) for h in services.hearsay_check(ev))
                for h in regions:
                    if h.id not in oracle_seen and haversine_m(pos, h.region_center) <= h.region_radius_m:
                        oracle_seen.add(h.id)
                        oracle_log.append((step, h.id))
            assert delivered_log == oracle_log
            pairs = [(USER, hid) for _s, hid in delivered_log]
            assert len(pairs) == len(set(pairs))  # never twice per (user, item)


RADAR_KIND_ORDER = {"LANDMARK": 0, "FACILITY": 1, "USER": 2}


def test_a7_smart_town_and_radar_oracles(tmp_path):
    with budget("A7 smart town & radar oracle equivalence", 5.0):
        rng = random.Random(77)
        store = GlossStore(tmp_path)
        store.facilities = [
            Facility(id=f"f{i:02d}", name=f"F{i}", category=rng.choice(["pharmacy", "cafe", "bank"]),
                     position=coord(rng.uniform(55.9, 56.1), rng.uniform(-2.1, -1.9)), info="")
            for i in range(50)
        ]
        store.landmarks = [
            Landmark(id=f"l{i:02d}", name=f"L{i}",
                     position=coord(rng.uniform(55.9, 56.1), rng.uniform(-2.1, -1.9)))
            for i in range(10)
        ]
        users = [f"+4400000000{i:02d}" for i in range(5)]
        for i, u in enumerate(users):
            store.record_event(location_event(
                user=u, lat=round(rng.uniform(55.9, 56.1), 5), lon=round(rng.uniform(-2.1, -1.9), 5),
                at=BASE_TIME + timedelta(seconds=i)))
        store.visibility = {
            u: frozenset(rng.sample(users, k=rng.randrange(0, 5)) + (["*"] if rng.random() < 0.3 else []))
            for u in users
        }
        services = LocationServices(store)

        for _ in range(200):
            origin = coord(rng.uniform(55.9, 56.1), rng.uniform(-2.1, -1.9))
            radius = rng.uniform(500, 20000)
            category = rng.choice([None, "pharmacy", "cafe"])

            result = services.smart_town(origin, radius, category)
            st_oracle = sorted(
                ((haversine_m(origin, f.position), f.id) for f in store.facilities
                 if (category is None or f.category == category)
                 and haversine_m(origin, f.position) <= radius),
            )
            assert [(e.distance_m, e.facility.id) for e in result.entries] == st_oracle

            me = rng.choice(users)
            my_pos = store.latest_location(me).position
            entries = services.radar(me, radius)
            expected = []
            for lm in store.landmarks:
                d = haversine_m(my_pos, lm.position)
                if d <= radius:
                    expected.append((d, RADAR_KIND_ORDER["LANDMARK"], lm.id))
            for f in store.facilities:
                d = haversine_m(my_pos, f.position)
                if d <= radius:
                    expected.append((d, RADAR_KIND_ORDER["FACILITY"], f.id))
            for other in users:
                if other == me:
                    continue
                grants = store.visibility.get(other, frozenset())
                if "*" not in grants and me not in grants:
                    continue
                d = haversine_m(my_pos, store.latest_location(other).position)
                if d <= radius:
                    expected.append((d, RADAR_KIND_ORDER["USER"], other))
            expected.sort()
            assert [(e.distance_m, RADAR_KIND_ORDER[e.kind.value], e.id) for e in entries] == expected
            assert all(e.id != me for e in entries)
            assert all(e.distance_m <= radius for e in entries)


def test_a8_simulator_determinism_and_sanity():
    with budget("A8 simulator determinism & sanity", 30.0):
        # (i) identical seeds, bit-identical metrics
        spec = topology_from_dict({
            "nodes": [{"id": n, "role": "HUB"} for n in "ABCD"],
            "links": [
                {"a": "A", "b": "B", "kind": "IP", "latency": {"uniform": [1, 20]}, "loss": 0.2},
                {"a": "B", "b": "C", "kind": "SMS", "latency": {"uniform": [2, 40]}, "loss": 0.1},
                {"a": "C", "b": "D", "kind": "IP", "latency": {"fixed": 7}, "loss": 0.15},
                {"a": "A", "b": "D", "kind": "BLUETOOTH", "latency": {"fixed": 4}, "loss": 0.05},
            ],
        })
        workload = [SimMessage(f"m{i}", "A", "D", inject_ms=i * 3) for i in range(50)]
        first = emit_metrics(run_sim(spec, workload, flood_policy(4), seed=42), "json")
        second = emit_metrics(run_sim(spec, workload, flood_policy(4), seed=42), "json")
        assert first == second

        # (ii) 2-node zero loss: ratio 1.0, latency exactly the link latency
        two = topology_from_dict({
            "nodes": [{"id": "A", "role": "MOBILE"}, {"id": "B", "role": "SERVER"}],
            "links": [{"a": "A", "b": "B", "kind": "IP", "latency": {"fixed": 10}, "loss": 0}],
        })
        m = run_sim(two, [SimMessage("m1", "A", "B", inject_ms=99)], flood_policy(1), seed=0)
        assert m.delivery_ratio == 1.0
        assert m.latency_ms == [10]

        # (iii) K3 flood, ttl 2 (hand trace): 4 transmissions, 2 duplicates
        k3 = topology_from_dict({
            "nodes": [{"id": n, "role": "HUB"} for n in "ABC"],
            "links": [{"a": a, "b": b, "kind": "IP", "latency": {"fixed": 10}, "loss": 0}
                      for a, b in (("A", "B"), ("A", "C"), ("B", "C"))],
        })
        m = run_sim(k3, [SimMessage("m1", "A", "C")], flood_policy(2), seed=0)
        assert (m.transmissions, m.duplicates_suppressed, m.delivered) == (4, 2, 1)

        # (iv) loss 0.3, 10k single-hop messages, ratio within 0.70 +/- 0.02
        lossy = topology_from_dict({
            "nodes": [{"id": "A", "role": "HUB"}, {"id": "B", "role": "HUB"}],
            "links": [{"a": "A", "b": "B", "kind": "IP", "latency": {"fixed": 1}, "loss": 0.3}],
        })
        workload = [SimMessage(f"m{i}", "A", "B", inject_ms=i) for i in range(10_000)]
        m = run_sim(lossy, workload, flood_policy(1), seed=1234)
        assert abs(m.delivery_ratio - 0.70) <= 0.02


def test_a9_flooding_brute_force_equivalence():
    with budget("A9 flooding brute-force equivalence", 60.0):
        checked = 0
        for n in (2, 3, 4, 5):
            names = [chr(65 + i) for i in range(n)]
            for edges in connected_graphs(n):
                spec = topology_from_dict({
                    "nodes": [{"id": x, "role": "HUB"} for x in names],
                    "links": [{"a": names[a], "b": names[b], "kind": "IP",
                               "latency": {"fixed": 10}, "loss": 0} for a, b in edges],
                })
                metrics = run_sim(spec, [SimMessage("m", names[0], names[-1])], flood_policy(4), seed=1)
                expected = flood_reference(n, edges, 0, n - 1, ttl=4)
                assert metrics.transmissions == expected["transmissions"], (n, edges)
                assert metrics.delivered == expected["delivered"], (n, edges)
                assert metrics.duplicates_suppressed == expected["duplicates_suppressed"], (n, edges)
                checked += 1
        assert checked == 1 + 4 + 38 + 728  # connected labeled graphs on 2..5 nodes


CATALOG_KINDS = ["event_bus", "gps_source", "sms_device", "sms_xml_device",
                 "xml_codec_adapter", "file_sink", "mystery_kind"]


def _random_spec(rng: random.Random) -> dict:
    n = rng.randrange(1, 6)
    ids = []
    components = []
    for i in range(n):
        cid = f"c{rng.randrange(0, n + 1)}" if rng.random() < 0.15 else f"c{i}"
        kind = rng.choice(CATALOG_KINDS)
        params: dict = {}
        if kind == "gps_source":
            params = {"user": rng.choice([USER, "bob", "+44"]),
                      "interval_ms": rng.choice([100, 1000]),
                      "trace": [{"lat": 56.0, "lon": -2.0, "time": "2002-09-01T12:00:00Z"}]}
        elif kind in ("sms_device", "sms_xml_device"):
            params = {"gateway": "loopback:fuzz", "own_number": USER}
            if rng.random() < 0.2:
                params.pop("own_number")
        elif kind == "xml_codec_adapter":
            params = {"direction": rng.choice(["RECORD_TO_TEXT", "TEXT_TO_RECORD", "SIDEWAYS"])}
        elif kind == "file_sink":
            params = {"directory": "fuzz-sink"}
        ids.append(cid)
        components.append({"id": cid, "catalog_kind": kind, "params": params})
    connections = []
    for _ in range(rng.randrange(0, n + 2)):
        pick = lambda: rng.choice(ids + (["ghost"] if rng.random() < 0.1 else []))
        connections.append({"from": pick(), "to": pick()})
    return {"components": components, "connections": connections}


def _direct_verdict(spec: dict, ctx: BuildContext) -> tuple[bool, str | None]:
    try:
        instantiate_spec(spec, ctx)
        return True, None
    except GlossError as exc:
        return False, exc.code


def test_a10_control_plane_validation_parity(tmp_path):
    with budget("A10 control-plane validation parity", 30.0):
        app = create_app(tmp_path / "server", watch=False)
        direct_ctx = BuildContext(data_dir=tmp_path / "direct")
        rng = random.Random(1010)
        with TestClient(app) as client:
            accepted = rejected = 0
            for _ in range(200):
                spec = _random_spec(rng)
                resp = client.post("/assemblies", json=spec)
                http_verdict = (resp.status_code == 201,
                                None if resp.status_code == 201 else resp.json().get("error"))
                assert resp.status_code in (201, 422), resp.text
                direct = _direct_verdict(spec, direct_ctx)
                assert http_verdict == direct, (spec, http_verdict, direct)
                accepted += http_verdict[0]
                rejected += not http_verdict[0]
            assert accepted > 10 and rejected > 10  # corpus exercises both sides

            # fuzzed query endpoints never 500
            fuzz_targets = []
            for _ in range(60):
                junk = "".join(rng.choices(string.printable.strip(), k=rng.randrange(1, 12)))
                fuzz_targets.extend([
                    f"/users/{junk}/location",
                    f"/users/{junk}/trail?from={junk}&to={junk}",
                    f"/smarttown?lat={junk}&lon=0&radius={junk}",
                    f"/users/{junk}/radar?radius={junk}",
                ])
            fuzz_targets.extend([
                "/smarttown", "/smarttown?lat=999&lon=999&radius=-5",
                "/users//location", "/users/+447700900123/trail?from=2002-13-45",
            ])
            for url in fuzz_targets:
                resp = client.get(url)
                assert resp.status_code < 500, (url, resp.status_code, resp.text)
            for body in (None, [], {"components": "nope"}, {"components": [{"id": 1}]},
                         {"topology": 5}, {"garbage": True}):
                resp = client.post("/assemblies", json=body)
                assert resp.status_code < 500, (body, resp.status_code)
                resp = client.post("/simulations", json=body)
                assert resp.status_code < 500, (body, resp.status_code)
