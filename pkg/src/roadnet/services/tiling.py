from __future__ import annotations

import math
from collections.abc import Iterable, Mapping

from ..core.errors import ConfigError
from ..core.logging import get_logger
from ..core.observability import stage
from ..domain.descriptor import NodeDescriptor
from ..domain.graph import GraphBuilder, RoadGraph
from .connect_net import ConnectNet, check_compatible, predict_edges
from .road_graph import merge_graphs

log = get_logger(__name__)


def axis_positions(length: float, tile: int, overlap: int) -> list[int]:
    if overlap >= tile:
        raise ConfigError("overlap must be smaller than tile")
    stride = tile - overlap
    if length <= tile:
        return [0]
    count = int(math.ceil((length - tile) / stride)) + 1
    return [min(k * stride, int(math.ceil(length)) - tile) for k in range(count)]


def tile_positions(extent: tuple[float, float], tile: int, overlap: int) -> list[tuple[int, int]]:
    """Top-left corners of a sliding window, row-major; the last tile is flush
    with the canvas edge."""
    xs = axis_positions(extent[0], tile, overlap)
    ys = axis_positions(extent[1], tile, overlap)
    return [(x, y) for y in ys for x in xs]


def _inside(p: tuple[float, float], origin: tuple[int, int], size: tuple[float, float]) -> bool:
    return origin[0] <= p[0] <= origin[0] + size[0] and origin[1] <= p[1] <= origin[1] + size[1]


def tile_size(extent: tuple[float, float], tile: int) -> tuple[float, float]:
    return (min(float(tile), extent[0]), min(float(tile), extent[1]))


def tile_subgraph(g: RoadGraph, origin: tuple[int, int], tile: int) -> RoadGraph:
    """Nodes inside the window and the edges between them, in canvas coordinates."""
    size = tile_size(g.extent, tile)
    keep = {n.id for n in g.nodes if _inside(n.xy, origin, size)}
    builder = GraphBuilder(g.extent)
    for n in g.nodes:
        if n.id in keep:
            builder.add_node(n.x, n.y, node_id=n.id)
    for a, b in g.edge_list:
        if a in keep and b in keep:
            builder.add_edge(a, b)
    return builder.build()


def stitch(
    graphs: Iterable[RoadGraph], extent: tuple[float, float], snap_tol: float = 2.0
) -> RoadGraph:
    """Merge per-tile graphs in order; nodes within ``snap_tol`` are unified."""
    out = RoadGraph.empty(extent)
    for g in graphs:
        out = merge_graphs(out, g, snap_tol)
    return out


def extract_tiled(
    net: ConnectNet,
    descriptors: Mapping[int, NodeDescriptor],
    extent: tuple[float, float],
    tile: int = 512,
    overlap: int = 128,
    threshold: float = 0.5,
    snap_tol: float = 2.0,
    range_r: float | None = None,
    n_pt: int | None = None,
) -> RoadGraph:
    """Global stage over a sliding window: predict edges per tile, then stitch."""
    check_compatible(net.config, range_r=range_r, n_pt=n_pt)
    size = tile_size(extent, tile)
    positions = tile_positions(extent, tile, overlap)
    parts: list[RoadGraph] = []
    with stage("extract"):
        for ox, oy in positions:
            local = {
                i: NodeDescriptor((d.coord[0] - ox, d.coord[1] - oy), d.bins)
                for i, d in descriptors.items()
                if _inside(d.coord, (ox, oy), size)
            }
            if not local:
                continue
            predicted = predict_edges(net, local, size, threshold, range_r, n_pt)
            builder = GraphBuilder(extent)
            for n in predicted.nodes:
                builder.add_node(n.x + ox, n.y + oy, node_id=n.id)
            for a, b in predicted.edge_list:
                builder.add_edge(a, b)
            parts.append(builder.build())
        graph = stitch(parts, extent, snap_tol)
    log.info("extracted", tiles=len(positions), nodes=len(graph.nodes), edges=len(graph.edges))
    return graph
