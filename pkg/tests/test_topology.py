import itertools

import pytest

from smecplan.linkbudget import LinkConfig, RateTable
from smecplan.orbital import ConstellationConfig
from smecplan.scenario import ScenarioConfig, Task, TopologyMode, build_snapshots
from smecplan.topology import path_edges, ring_shortest_path, snapshot


class TestRingShortestPath:
    def test_self_path(self):
        assert ring_shortest_path(5, 5, 20) == (1, 0)

    def test_forward_shorter(self):
        assert ring_shortest_path(5, 10, 20) == (1, 5)

    def test_backward_shorter(self):
        assert ring_shortest_path(10, 5, 20) == (-1, 5)

    def test_tie_goes_forward(self):
        assert ring_shortest_path(0, 10, 20) == (1, 10)

    def test_hop_count_formula(self):
        for n in (2, 3, 7, 20):
            for u, v in itertools.product(range(n), repeat=2):
                _, hops = ring_shortest_path(u, v, n)
                diff = abs(u - v)
                assert hops == min(diff, n - diff)

    def test_triangle_inequality(self):
        n = 20
        for u, v, w in itertools.product(range(0, n, 3), repeat=3):
            assert (
                ring_shortest_path(u, w, n)[1]
                <= ring_shortest_path(u, v, n)[1] + ring_shortest_path(v, w, n)[1]
            )

    def test_path_edges_walk_the_ring(self):
        edges = path_edges(18, 2, 20)
        assert edges == [(18, 1), (19, 1), (0, 1), (1, 1)]
        assert len(path_edges(5, 15, 20)) == 10


@pytest.fixture(scope="module")
def snap_v0():
    cfg = ScenarioConfig(topology_mode=TopologyMode.V_D_EQUALS_V0)
    return build_snapshots(cfg)[0]


@pytest.fixture(scope="module")
def snap_v5():
    cfg = ScenarioConfig(topology_mode=TopologyMode.V_D_OFFSET, vd_offset_hops=5)
    return build_snapshots(cfg)[0]


class TestSnapshot:
    def test_dest_equals_source_topology(self, snap_v0):
        assert snap_v0.dest_sat == snap_v0.source_sat == 5
        assert snap_v0.hops_to_gs[5] == 1
        assert snap_v0.hops_from_source[5] == 0
        # scatter symmetric to both ring neighbors
        assert snap_v0.hops_from_source[6] == snap_v0.hops_from_source[4] == 1

    def test_five_hop_destination(self, snap_v5):
        assert snap_v5.dest_sat == 10
        assert snap_v5.hops_to_gs[snap_v5.source_sat] == 6  # 5 ring hops + GS hop
        assert snap_v5.hops_to_gs[10] == 1

    def test_downlink_rate_at_edge(self, snap_v0):
        assert snap_v0.downlink_rate_bps == pytest.approx(2.16e9, rel=1e-9)

    def test_edge_indicator_consistency(self, snap_v5):
        n = snap_v5.n_sats
        for v in range(n):
            expected = path_edges(snap_v5.source_sat, v, n)
            for node in range(n):
                for direction in (1, -1):
                    e = snap_v5.edge_index(node, direction)
                    on_path = (node, direction) in expected
                    assert snap_v5.scatter_edge_use[e, v] == (1.0 if on_path else 0.0)

    def test_edge_usage_sums_to_path_length(self, snap_v5):
        n = snap_v5.n_sats
        for v in range(n):
            assert snap_v5.scatter_edge_use[:, v].sum() == snap_v5.hops_from_source[v]
            # gather uses only the ISL part of the route to ground
            assert snap_v5.gather_edge_use[:, v].sum() == snap_v5.hops_to_gs[v] - 1

    def test_gather_isl_term_vanishes_at_destination(self, snap_v5):
        assert snap_v5.gather_edge_use[:, snap_v5.dest_sat].sum() == 0

    def test_source_edges(self, snap_v0):
        assert set(snap_v0.source_edges()) == {(5, 1), (5, -1)}

    def test_rateless_when_nothing_visible(self):
        con = ConstellationConfig(n_sats=1, phase_offset_rad=3.14159)
        s = snapshot(0, 0.0, 0.078, 0, con, LinkConfig(), RateTable.shannon_default())
        assert s.dest_sat is None
        assert s.downlink_rate_bps == 0.0

    def test_degenerate_rings(self):
        table = RateTable.shannon_default()
        s2 = snapshot(0, 0.0, 0.078, 0, ConstellationConfig(n_sats=2), LinkConfig(), table)
        assert set(s2.source_edges()) == {(0, 1), (0, -1)}
        s1 = snapshot(0, 0.0, 0.078, 0, ConstellationConfig(n_sats=1), LinkConfig(), table)
        assert s1.source_edges() == []

    def test_full_edge_enforcement_flag(self):
        cfg = ScenarioConfig(enforce_source_edges_only=False)
        snap = build_snapshots(cfg)[0]
        assert len(snap.enforced_edges()) == 2 * snap.n_sats

    def test_snapshots_cover_all_frames(self):
        cfg = ScenarioConfig(task=Task(frame_widths=(1, 2, 0, 3)))
        snaps = build_snapshots(cfg)
        assert [s.slot_index for s in snaps] == [0, 1, 2, 3]
        # destination stays put over a four-slot task with the default pass
        assert len({s.dest_sat for s in snaps}) == 1
