from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from ..core.errors import DegenerateInputError, GraphValidationError
from ..domain.graph import Point, RoadGraph
from ..domain.metrics import AplsConfig, PairDetail
from .road_graph import densify, nearest_projection

INF = math.inf


class PathLengths:
    """Dijkstra over Euclidean edge lengths with per-source caching."""

    def __init__(self, g: RoadGraph) -> None:
        self.graph = g
        self._nx = g.to_networkx()
        self._cache: dict[int, dict[int, float]] = {}

    def from_node(self, u: int) -> dict[int, float]:
        if u not in self._cache:
            self._cache[u] = nx.single_source_dijkstra_path_length(self._nx, u, weight="length")
        return self._cache[u]

    def length(self, u: int, v: int) -> float:
        if u not in self.graph or v not in self.graph:
            raise GraphValidationError(f"unknown node in path query ({u}, {v})")
        return self.from_node(u).get(v, INF)

    def components(self) -> list[list[int]]:
        return sorted(sorted(c) for c in nx.connected_components(self._nx))


def shortest_path_length(g: RoadGraph, u: int, v: int) -> float:
    return PathLengths(g).length(u, v)


@dataclass(slots=True, frozen=True)
class Anchor:
    """A location on the graph: a vertex, or a point ``s`` px along edge (x, y)."""

    vertex: int | None
    edge: tuple[int, int] | None = None
    s: float = 0.0
    length: float = 0.0

    def ends(self) -> list[tuple[int, float]]:
        if self.vertex is not None:
            return [(self.vertex, 0.0)]
        assert self.edge is not None
        return [(self.edge[0], self.s), (self.edge[1], self.length - self.s)]


def snap_anchor(g: RoadGraph, p: Point, radius: float) -> Anchor | None:
    """Project ``p`` onto the nearest edge of ``g`` if it lies within ``radius``."""
    if not g.edges:
        return None
    _, edge_id, dist, t = nearest_projection(g, p)
    if dist > radius:
        return None
    x, y = g.edge_list[edge_id]
    if t == 0.0:
        return Anchor(vertex=x)
    if t == 1.0:
        return Anchor(vertex=y)
    length = g.edge_length(x, y)
    return Anchor(vertex=None, edge=(x, y), s=t * length, length=length)


def anchor_distance(paths: PathLengths, a: Anchor, b: Anchor) -> float:
    best = INF
    for ea, da in a.ends():
        reach = paths.from_node(ea)
        for eb, db in b.ends():
            best = min(best, da + reach.get(eb, INF) + db)
    if a.edge is not None and a.edge == b.edge:
        best = min(best, abs(a.s - b.s))
    return best


def _pairs(paths: PathLengths, cfg: AplsConfig, rng: np.random.Generator) -> list[tuple[int, int]]:
    g = paths.graph
    if len(g.nodes) <= cfg.exhaustive_limit:
        ids = g.node_ids
        return [
            (u, v)
            for i, u in enumerate(ids)
            for v in ids[i + 1 :]
            if 0.0 < paths.length(u, v) < INF
        ]
    comps = [c for c in paths.components() if len(c) >= 2]
    if not comps:
        return []
    owner = {n: c for c in comps for n in c}
    eligible = sorted(owner)
    pairs: list[tuple[int, int]] = []
    attempts = 0
    while len(pairs) < cfg.samples and attempts < 20 * cfg.samples:
        attempts += 1
        u = eligible[int(rng.integers(len(eligible)))]
        comp = owner[u]
        v = comp[int(rng.integers(len(comp)))]
        if v != u and paths.length(u, v) > 0.0:
            pairs.append((u, v))
    return pairs


def apls_directional(
    a: RoadGraph,
    b: RoadGraph,
    cfg: AplsConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, list[PairDetail]]:
    """One-sided path-length similarity of ``b`` measured on pairs drawn from ``a``."""
    cfg = cfg or AplsConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    paths_a, paths_b = PathLengths(a), PathLengths(b)
    pairs = _pairs(paths_a, cfg, rng)
    if not pairs:
        raise DegenerateInputError("degenerate ground truth")
    anchors: dict[int, Anchor | None] = {}
    details: list[PairDetail] = []
    for u, v in pairs:
        for n in (u, v):
            if n not in anchors:
                anchors[n] = snap_anchor(b, a.position(n), cfg.snap_radius)
        la = paths_a.length(u, v)
        au, av = anchors[u], anchors[v]
        lb = anchor_distance(paths_b, au, av) if au is not None and av is not None else INF
        penalty = 1.0 if lb == INF else min(1.0, abs(la - lb) / la)
        details.append(PairDetail(u, v, la, None if lb == INF else lb, penalty))
    score = 1.0 - sum(d.penalty for d in details) / len(details)
    return score, details


def combine(a: float, b: float, mode: str = "harmonic") -> float:
    if a + b <= 0.0:
        return 0.0
    product = a * b / (a + b)
    return 2.0 * product if mode == "harmonic" else product


def apls(
    gt: RoadGraph, pred: RoadGraph, cfg: AplsConfig | None = None
) -> tuple[float, float, float, list[PairDetail]]:
    """Returns (apls, gt->pred, pred->gt, gt->pred pair details)."""
    cfg = cfg or AplsConfig()
    if cfg.densify_step is not None:
        gt, pred = densify(gt, cfg.densify_step), densify(pred, cfg.densify_step)
    rng = np.random.default_rng(cfg.seed)
    try:
        forward, details = apls_directional(gt, pred, cfg, rng)
    except DegenerateInputError:
        forward, details = 0.0, []
    try:
        backward, _ = apls_directional(pred, gt, cfg, rng)
    except DegenerateInputError:
        backward = 0.0
    return combine(forward, backward, cfg.mode), forward, backward, details
