"""Per-slot network snapshots of the satellite ring plus the ground station.

A snapshot freezes, for one slot: which satellite owns the downlink, the
sustainable downlink rate, hop counts from the source and to the ground
station, and per-edge usage indicators for every directed ring link. The
planner treats all of this as constants, so snapshots are built once for the
whole task before any optimization runs.

Directed ring edges are identified as (node, direction): direction +1 is the
increasing-index neighbor, -1 the decreasing one. Equal-length ring paths
break toward increasing index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linkbudget, orbital
from .orbital import NoVisibleSatellite


def ring_shortest_path(u: int, v: int, n: int) -> tuple[int, int]:
    """(direction, hop_count) of the shortest ring walk u -> v.

    direction is +1/-1 (+1 on ties and for u == v, where hops is 0).
    """
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"nodes ({u},{v}) outside ring of {n}")
    forward = (v - u) % n
    backward = (u - v) % n
    if forward <= backward:
        return 1, forward
    return -1, backward


def path_edges(u: int, v: int, n: int) -> list[tuple[int, int]]:
    """Directed edges (node, direction) along the shortest ring walk u -> v."""
    direction, hops = ring_shortest_path(u, v, n)
    edges = []
    node = u
    for _ in range(hops):
        edges.append((node, direction))
        node = (node + direction) % n
    return edges


@dataclass(frozen=True)
class TopologySnapshot:
    """Frozen routing view of the ring for one slot."""

    slot_index: int
    n_sats: int
    source_sat: int
    dest_sat: Optional[int]
    downlink_rate_bps: float
    hops_from_source: np.ndarray  # ring hops v_0 -> n, shape (N,)
    hops_to_gs: np.ndarray  # ring hops n -> v_d plus the GS hop, shape (N,)
    # Edge usage for every directed ring edge, keyed by edge_index(node, dir):
    scatter_edge_use: np.ndarray  # y_e(v_0, n), shape (2N, N)
    gather_edge_use: np.ndarray  # y_e(n, g) restricted to the ISL part, shape (2N, N)
    direct_edge_use: np.ndarray  # y_e(v_0, g), shape (2N,)
    enforce_source_edges_only: bool = True

    def edge_index(self, node: int, direction: int) -> int:
        return 2 * node + (0 if direction == 1 else 1)

    def source_edges(self) -> list[tuple[int, int]]:
        """The directed ISLs leaving the source satellite (empty for N=1)."""
        if self.n_sats == 1:
            return []
        return [(self.source_sat, 1), (self.source_sat, -1)]

    def enforced_edges(self) -> list[tuple[int, int]]:
        """Edges whose rate constraint the planner enforces."""
        if self.enforce_source_edges_only:
            return self.source_edges()
        if self.n_sats == 1:
            return []
        return [(u, d) for u in range(self.n_sats) for d in (1, -1)]


def snapshot(
    slot_index: int,
    t_start: float,
    slot_len: float,
    source_sat: int,
    constellation: orbital.ConstellationConfig,
    link: linkbudget.LinkConfig,
    table: linkbudget.RateTable,
    enforce_source_edges_only: bool = True,
) -> TopologySnapshot:
    """Build the frozen routing/rate view for one slot.

    The destination satellite is fixed at the slot start; a ring with no
    visible satellite yields a rateless slot (dest None, rate 0).
    """
    n = constellation.n_sats
    try:
        dest = orbital.destination_satellite(constellation, t_start)
    except NoVisibleSatellite:
        dest = None

    if dest is None:
        rate = 0.0
    else:
        rate = linkbudget.select_rate(
            lambda t: orbital.slant_distance(constellation, orbital.destination_satellite(constellation, t), t),
            t_start,
            slot_len,
            link,
            table,
        )

    hops_src = np.array([ring_shortest_path(source_sat, v, n)[1] for v in range(n)], dtype=float)
    if dest is None:
        hops_gs = np.full(n, np.inf)
    else:
        hops_gs = np.array([ring_shortest_path(v, dest, n)[1] + 1 for v in range(n)], dtype=float)

    scatter_use = np.zeros((2 * n, n))
    gather_use = np.zeros((2 * n, n))
    direct_use = np.zeros(2 * n)

    def eidx(node, direction):
        return 2 * node + (0 if direction == 1 else 1)

    for v in range(n):
        for e in path_edges(source_sat, v, n):
            scatter_use[eidx(*e), v] = 1.0
        if dest is not None:
            for e in path_edges(v, dest, n):
                gather_use[eidx(*e), v] = 1.0
    if dest is not None:
        for e in path_edges(source_sat, dest, n):
            direct_use[eidx(*e)] = 1.0

    return TopologySnapshot(
        slot_index=slot_index,
        n_sats=n,
        source_sat=source_sat,
        dest_sat=dest,
        downlink_rate_bps=rate,
        hops_from_source=hops_src,
        hops_to_gs=hops_gs,
        scatter_edge_use=scatter_use,
        gather_edge_use=gather_use,
        direct_edge_use=direct_use,
        enforce_source_edges_only=enforce_source_edges_only,
    )
