"""Overlay simulator: topology validation, deterministic runs, routing
policies, metrics serialization, and equivalence with the BFS reference."""

from __future__ import annotations

import json

import pytest

from gloss.errors import MissingPositions, SimulationTooLarge, ValidationFailure
from gloss.sim import (
    BROADCAST,
    Simulator,
    SimMessage,
    emit_metrics,
    flood_policy,
    geo_greedy_policy,
    load_topology,
    run,
    topology_from_dict,
    workload_from_list,
)

from .reference_sim import connected_graphs, flood_reference


def topo(nodes, links):
    return topology_from_dict({"nodes": nodes, "links": links})


def simple_nodes(*ids):
    return [{"id": i, "role": "HUB"} for i in ids]


def link(a, b, fixed=10, loss=0.0, **extra):
    return {"a": a, "b": b, "kind": "IP", "latency": {"fixed": fixed}, "loss": loss, **extra}


def msg(msg_id, origin, destination, inject_ms=0, size=0):
    return SimMessage(msg_id=msg_id, origin=origin, destination=destination,
                      payload_size=size, inject_ms=inject_ms)


TWO_NODE = {"nodes": simple_nodes("A", "B"), "links": [link("A", "B")]}
LINE3 = {"nodes": simple_nodes("A", "B", "C"), "links": [link("A", "B"), link("B", "C")]}
K3 = {"nodes": simple_nodes("A", "B", "C"),
      "links": [link("A", "B"), link("A", "C"), link("B", "C")]}


class TestTopologyLoading:
    def test_two_node_file(self, tmp_path):
        f = tmp_path / "topo.json"
        f.write_text(json.dumps(TWO_NODE), encoding="utf-8")
        spec = load_topology(f)
        assert len(spec.nodes) == 2 and len(spec.links) == 1

    def test_unknown_endpoint(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A"), [link("A", "Z")])

    def test_bad_loss_probability(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A", "B"), [link("A", "B", loss=1.5)])

    def test_self_link(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A"), [link("A", "A")])

    def test_duplicate_node(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A", "A"), [])

    def test_duplicate_link_pair(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A", "B"), [link("A", "B"), link("B", "A")])

    def test_bad_uniform_bounds(self):
        with pytest.raises(ValidationFailure):
            topo(simple_nodes("A", "B"),
                 [{"a": "A", "b": "B", "kind": "IP", "latency": {"uniform": [9, 3]}, "loss": 0}])

    def test_duplicate_msg_id(self):
        with pytest.raises(ValidationFailure):
            workload_from_list([
                {"msg_id": "m", "origin": "A", "destination": "B"},
                {"msg_id": "m", "origin": "A", "destination": "B"},
            ])


class TestFloodRuns:
    def test_single_hop_arithmetic(self):
        metrics = run(topo(**TWO_NODE), [msg("m1", "A", "B", inject_ms=5)], flood_policy(4), seed=1)
        assert metrics.delivered == 1
        assert metrics.transmissions == 1
        assert metrics.latency_ms == [10]
        assert metrics.hop_counts == [1]
        assert metrics.delivery_ratio == 1.0
        assert metrics.deliveries[0].msg_id == "m1"

    def test_determinism_bit_identical(self):
        spec = topo(simple_nodes("A", "B", "C", "D"),
                    [{"a": "A", "b": "B", "kind": "IP", "latency": {"uniform": [1, 30]}, "loss": 0.2},
                     {"a": "B", "b": "C", "kind": "SMS", "latency": {"uniform": [5, 50]}, "loss": 0.1},
                     {"a": "C", "b": "D", "kind": "IP", "latency": {"fixed": 3}, "loss": 0.3},
                     {"a": "A", "b": "D", "kind": "IP", "latency": {"fixed": 11}, "loss": 0.05}])
        workload = [msg(f"m{i}", "A", "D", inject_ms=i * 7) for i in range(40)]
        out1 = emit_metrics(run(spec, workload, flood_policy(5), seed=42), "json")
        out2 = emit_metrics(run(spec, workload, flood_policy(5), seed=42), "json")
        assert out1 == out2

    def test_line3_hand_trace(self):
        # A->B at 10, B relays only to C (never back): delivered at 20, 2 hops
        metrics = run(topo(**LINE3), [msg("m1", "A", "C")], flood_policy(4), seed=0)
        assert metrics.transmissions == 2
        assert metrics.latency_ms == [20]
        assert metrics.hop_counts == [2]

    def test_k3_hand_trace(self):
        # hand enumeration: A->B, A->C, B->C, C->B
        metrics = run(topo(**K3), [msg("m1", "A", "C")], flood_policy(2), seed=0)
        assert metrics.transmissions == 4
        assert metrics.duplicates_suppressed == 2
        assert metrics.delivered == 1

    def test_ttl_exhausted(self):
        metrics = run(topo(**LINE3), [msg("m1", "A", "C")], flood_policy(1), seed=0)
        assert metrics.delivered == 0
        assert metrics.delivery_ratio == 0.0

    def test_broadcast_counts_per_receiving_node(self):
        metrics = run(topo(**K3), [msg("m1", "A", BROADCAST)], flood_policy(2), seed=0)
        assert metrics.delivered == 2  # B and C
        assert metrics.delivery_ratio == 0.0  # no destination-addressed messages

    def test_bad_ttl(self):
        with pytest.raises(ValidationFailure):
            flood_policy(0)

    def test_oversize_dropped_before_wire(self):
        spec = topo(simple_nodes("A", "B"), [link("A", "B", max_payload=160)])
        metrics = run(spec, [msg("m1", "A", "B", size=500)], flood_policy(2), seed=0)
        assert metrics.dropped_oversize == 1
        assert metrics.transmissions == 0
        assert metrics.delivered == 0

    def test_loss_calibration(self):
        spec = topo(simple_nodes("A", "B"), [link("A", "B", loss=0.3)])
        workload = [msg(f"m{i}", "A", "B", inject_ms=i) for i in range(10_000)]
        metrics = run(spec, workload, flood_policy(1), seed=2024)
        assert metrics.delivery_ratio == pytest.approx(0.70, abs=0.02)
        assert metrics.delivered + metrics.dropped_loss == 10_000

    def test_zero_loss_connected_delivers_all(self):
        spec = topo(**LINE3)
        workload = [msg(f"m{i}", "A", "C", inject_ms=i) for i in range(25)]
        metrics = run(spec, workload, flood_policy(4), seed=9)
        assert metrics.delivery_ratio == 1.0

    def test_horizon_cuts_processing(self):
        metrics = run(topo(**TWO_NODE), [msg("m1", "A", "B")], flood_policy(2), seed=0, horizon_ms=5)
        assert metrics.transmissions == 1  # sent at t=0
        assert metrics.delivered == 0  # arrival at t=10 > horizon

    def test_inject_beyond_horizon_rejected(self):
        with pytest.raises(ValidationFailure):
            run(topo(**TWO_NODE), [msg("m1", "A", "B", inject_ms=100)], flood_policy(2), seed=0, horizon_ms=50)

    def test_event_cap(self):
        spec = topo(**K3)
        workload = [msg(f"m{i}", "A", "C", inject_ms=i) for i in range(100)]
        with pytest.raises(SimulationTooLarge):
            run(spec, workload, flood_policy(2), seed=0, max_events=10)


class TestGeoGreedy:
    def positioned(self):
        return topo(
            [{"id": "A", "role": "MOBILE", "lat": 0.0, "lon": 0.0},
             {"id": "B", "role": "HUB", "lat": 0.0, "lon": 1.0},
             {"id": "C", "role": "SERVER", "lat": 0.0, "lon": 2.0}],
            [link("A", "B"), link("B", "C")],
        )

    def test_line_path(self):
        metrics = run(self.positioned(), [msg("m1", "A", "C")], geo_greedy_policy(), seed=0)
        assert metrics.delivered == 1
        assert metrics.hop_counts == [2]
        assert metrics.transmissions == 2
        assert metrics.duplicates_suppressed == 0

    def test_dead_end(self):
        spec = topo(
            [{"id": "A", "role": "HUB", "lat": 0.0, "lon": 0.0},
             {"id": "B", "role": "HUB", "lat": 0.0, "lon": 5.0},
             {"id": "C", "role": "HUB", "lat": 0.0, "lon": 2.0}],
            [link("A", "B")],  # only neighbor is farther from C than A is
        )
        metrics = run(spec, [msg("m1", "A", "C")], geo_greedy_policy(), seed=0)
        assert metrics.dropped_dead_end == 1
        assert metrics.delivered == 0

    def test_direct_link_wins(self):
        spec = topo(
            [{"id": "A", "role": "HUB", "lat": 0.0, "lon": 0.0},
             {"id": "B", "role": "HUB", "lat": 0.0, "lon": 1.0},
             {"id": "C", "role": "HUB", "lat": 0.0, "lon": 2.0}],
            [link("A", "B"), link("B", "C"), link("A", "C")],
        )
        metrics = run(spec, [msg("m1", "A", "C")], geo_greedy_policy(), seed=0)
        assert metrics.hop_counts == [1]

    def test_missing_positions(self):
        with pytest.raises(MissingPositions):
            run(topo(**TWO_NODE), [msg("m1", "A", "B")], geo_greedy_policy(), seed=0)

    def test_broadcast_rejected(self):
        with pytest.raises(ValidationFailure):
            run(self.positioned(), [msg("m1", "A", BROADCAST)], geo_greedy_policy(), seed=0)


class TestMetricsSerialization:
    def test_empty_metrics_summary_zeros(self):
        metrics = run(topo(**TWO_NODE), [], flood_policy(1), seed=0)
        csv = emit_metrics(metrics, "csv")
        lines = csv.strip().splitlines()
        assert lines[0] == "msg_id,latency_ms,hops"
        assert lines[-1].startswith("summary,delivered=0,transmissions=0")
        assert "delivery_ratio=0.000000" in lines[-1]

    def test_detail_row_format(self):
        metrics = run(topo(**TWO_NODE), [msg("msg-1", "A", "B")], flood_policy(1), seed=0)
        csv = emit_metrics(metrics, "csv")
        assert "msg-1,10,1" in csv.splitlines()

    def test_json_round_trip(self):
        metrics = run(topo(**K3), [msg("m1", "A", "C")], flood_policy(2), seed=3)
        parsed = json.loads(emit_metrics(metrics, "json"))
        assert parsed == metrics.as_dict()


class TestAudits:
    def test_event_order_strictly_sorted(self):
        sim = Simulator(topo(**K3), [msg(f"m{i}", "A", "C", inject_ms=i * 3) for i in range(10)],
                        flood_policy(3), seed=5)
        sim.run()
        keys = [(t, s) for t, s, _k in sim.trace]
        assert keys == sorted(keys)
        assert len(set(s for _t, s, _k in sim.trace)) == len(sim.trace)

    def test_conservation_every_transmission_resolves(self):
        sim = Simulator(
            topo(simple_nodes("A", "B", "C", "D"),
                 [link("A", "B", loss=0.25), link("B", "C", loss=0.25),
                  link("C", "D", loss=0.25), link("A", "D", loss=0.25)]),
            [msg(f"m{i}", "A", "C", inject_ms=i * 2) for i in range(50)],
            flood_policy(6),
            seed=17,
        )
        metrics = sim.run()
        arrivals = sum(1 for _t, _s, k in sim.trace if k == "ARRIVE")
        drops = sum(1 for _t, _s, k in sim.trace if k == "DROP")
        assert metrics.transmissions == arrivals + drops
        assert metrics.dropped_loss == drops

    def test_flood_matches_reference_on_small_graphs(self):
        # full enumeration lives in the acceptance suite; spot-check n=4 here
        for edges in connected_graphs(4):
            named = [chr(65 + i) for i in range(4)]
            spec = topo(simple_nodes(*named),
                        [link(named[a], named[b]) for a, b in edges])
            metrics = run(spec, [msg("m", named[0], named[-1])], flood_policy(4), seed=1)
            expected = flood_reference(4, edges, 0, 3, ttl=4)
            assert metrics.transmissions == expected["transmissions"], edges
            assert metrics.delivered == expected["delivered"], edges
            assert metrics.duplicates_suppressed == expected["duplicates_suppressed"], edges
            if expected["delivered"]:
                assert metrics.hop_counts == [expected["hops"]], edges
