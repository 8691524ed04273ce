from __future__ import annotations

from collections import defaultdict, deque
from collections.abc import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..core.logging import get_logger
from ..domain.graph import Point, RoadGraph
from ..domain.labels import ConnectionLabel, ConnectionLabelSet, Projection
from .road_graph import nearest_projection, point_segment_distances

log = get_logger(__name__)

VALID_WIDTH = 5.0
VERTEX_EPS = 1e-9


def filter_valid_nodes(
    pred_nodes: Sequence[Point], gt: RoadGraph, width: float = VALID_WIDTH
) -> tuple[list[int], list[int]]:
    """Split node indices by whether they fall on the ``width``-px gt road."""
    if not pred_nodes:
        return [], []
    if not gt.edges:
        return [], list(range(len(pred_nodes)))
    dist, _, _ = point_segment_distances(np.asarray(pred_nodes, dtype=np.float64), gt.segments())
    inside = dist.min(axis=1) <= width / 2.0
    kept = [i for i, ok in enumerate(inside) if ok]
    discarded = [i for i, ok in enumerate(inside) if not ok]
    return kept, discarded


def project_to_gt(valid_nodes: Mapping[int, Point], gt: RoadGraph) -> list[Projection]:
    out: list[Projection] = []
    for node_id in sorted(valid_nodes):
        point, edge_id, distance, t = nearest_projection(gt, valid_nodes[node_id])
        out.append(Projection(node_id, point, edge_id, t, distance))
    return out


def candidate_pairs(
    nodes: Mapping[int, Point], range_r: float, n_pt: int
) -> list[tuple[int, list[int]]]:
    """Up to ``n_pt`` nearest other nodes within ``range_r``, distance then id ordered."""
    ids = sorted(nodes)
    if not ids:
        return []
    coords = np.array([nodes[i] for i in ids], dtype=np.float64)
    tree = cKDTree(coords)
    out: list[tuple[int, list[int]]] = []
    for row, hits in enumerate(tree.query_ball_point(coords, r=range_r)):
        ranked = sorted(
            (float(np.hypot(*(coords[j] - coords[row]))), ids[j]) for j in hits if j != row
        )
        out.append((ids[row], [nid for _, nid in ranked[:n_pt]]))
    return out


class _ProjectionTopology:
    """Graph search over gt with projections inserted as blocking stations."""

    def __init__(self, projections: Sequence[Projection], gt: RoadGraph) -> None:
        self.gt = gt
        self.edge_index = {e: i for i, e in enumerate(gt.edge_list)}
        self.by_id = {p.node_id: p for p in projections}
        # projections sitting exactly on a gt vertex occupy that vertex
        self.at_vertex: dict[int, list[int]] = defaultdict(list)
        self.on_edge: dict[int, list[tuple[float, int]]] = defaultdict(list)
        self.vertex_of: dict[int, int] = {}
        for p in projections:
            a, b = gt.edge_list[p.edge_id]
            if p.t <= VERTEX_EPS:
                self.at_vertex[a].append(p.node_id)
                self.vertex_of[p.node_id] = a
            elif p.t >= 1.0 - VERTEX_EPS:
                self.at_vertex[b].append(p.node_id)
                self.vertex_of[p.node_id] = b
            else:
                self.on_edge[p.edge_id].append((p.t, p.node_id))
        for stations in self.on_edge.values():
            stations.sort()

    def reachable(self, source: int) -> set[int]:
        """Projections reachable from ``source`` without passing another one."""
        found: set[int] = set()
        frontier: deque[int] = deque()
        seen: set[int] = set()

        def visit_vertex(v: int) -> None:
            occupants = [o for o in self.at_vertex.get(v, ()) if o != source]
            if occupants:
                found.update(occupants)
                return
            if v not in seen:
                seen.add(v)
                frontier.append(v)

        if source in self.vertex_of:
            v = self.vertex_of[source]
            found.update(o for o in self.at_vertex[v] if o != source)
            seen.add(v)
            frontier.append(v)
        else:
            p = self.by_id[source]
            a, b = self.gt.edge_list[p.edge_id]
            stations = self.on_edge[p.edge_id]
            idx = stations.index((p.t, source))
            if idx > 0:
                found.add(stations[idx - 1][1])
            else:
                visit_vertex(a)
            if idx + 1 < len(stations):
                found.add(stations[idx + 1][1])
            else:
                visit_vertex(b)

        while frontier:
            v = frontier.popleft()
            for nb in self.gt.neighbors(v):
                edge_id = self.edge_index[(v, nb) if v < nb else (nb, v)]
                stations = self.on_edge.get(edge_id)
                if stations:
                    # entering from the lower-id end meets the smallest t first
                    found.add(stations[0][1] if v < nb else stations[-1][1])
                else:
                    visit_vertex(nb)
        found.discard(source)
        return found


def derive_connections(
    projections: Sequence[Projection],
    gt: RoadGraph,
    range_r: float,
    n_pt: int = 8,
    positions: Mapping[int, Point] | None = None,
) -> ConnectionLabelSet:
    """Label candidate pairs by adjacency of their projections along gt.

    Candidates come from :func:`candidate_pairs` over ``positions`` (the
    predicted node coordinates; projection points when omitted). Every pair
    is recorded in both directions with the same label.
    """
    positions = positions or {p.node_id: p.point for p in projections}
    valid = sorted(p.node_id for p in projections)
    topology = _ProjectionTopology(projections, gt)
    cache: dict[int, set[int]] = {}

    def adjacent(v: int, n: int) -> bool:
        if v not in cache:
            cache[v] = topology.reachable(v)
        return n in cache[v]

    labels: dict[tuple[int, int], int] = {}
    for v, cands in candidate_pairs({i: positions[i] for i in valid}, range_r, n_pt):
        for n in cands:
            if (v, n) in labels:
                continue
            label = int(adjacent(v, n))
            labels[(v, n)] = label
            labels[(n, v)] = label
    pairs = [ConnectionLabel(v, n, lab) for (v, n), lab in sorted(labels.items())]
    log.debug("labels_derived", valid=len(valid), pairs=len(pairs), positives=sum(labels.values()))
    return ConnectionLabelSet(valid_nodes=valid, pairs=pairs)


def generate_labels(
    pred_nodes: Mapping[int, Point], gt: RoadGraph, range_r: float, n_pt: int
) -> ConnectionLabelSet:
    """Filter, project and derive in one call."""
    ids = sorted(pred_nodes)
    kept, _ = filter_valid_nodes([pred_nodes[i] for i in ids], gt)
    valid = {ids[k]: pred_nodes[ids[k]] for k in kept}
    projections = project_to_gt(valid, gt)
    return derive_connections(projections, gt, range_r, n_pt, positions=valid)
