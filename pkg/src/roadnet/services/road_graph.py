from __future__ import annotations

import math
from collections.abc import Collection, Iterable, Sequence

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from ..core.errors import NoCenterlineError
from ..domain.graph import GraphBuilder, Point, RasterMap, RoadGraph, edge_key

TIE_EPS = 1e-12


def point_segment_distances(
    points: npt.ArrayLike, segments: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Exact point-to-segment geometry.

    Returns ``(dist, t, foot)`` with shapes (k, m), (k, m) and (k, m, 2) for k
    points against m segments; ``t`` is the clamped parametric position of the
    foot of the perpendicular (0 at the first segment end).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = segments[:, 0, :]
    ab = segments[:, 1, :] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = pts[:, None, :] - a[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("kmj,mj->km", ap, ab) / denom[None, :]
    t = np.where(denom[None, :] > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    foot = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    diff = pts[:, None, :] - foot
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return dist, t, foot


def endpoints(g: RoadGraph) -> set[int]:
    return {n.id for n in g.nodes if g.degree(n.id) < 2}


def raster_shape(extent: tuple[float, float]) -> tuple[int, int]:
    return (int(math.ceil(extent[1])), int(math.ceil(extent[0])))


def burn_segments(
    bits: npt.NDArray[np.bool_], segments: npt.NDArray[np.float64], radius: float
) -> None:
    """Set every pixel whose center lies within ``radius`` of a segment (in place)."""
    height, width = bits.shape
    for seg in segments:
        x0 = max(int(math.floor(min(seg[0, 0], seg[1, 0]) - radius)), 0)
        x1 = min(int(math.ceil(max(seg[0, 0], seg[1, 0]) + radius)), width - 1)
        y0 = max(int(math.floor(min(seg[0, 1], seg[1, 1]) - radius)), 0)
        y1 = min(int(math.ceil(max(seg[0, 1], seg[1, 1]) + radius)), height - 1)
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        pts = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
        dist, _, _ = point_segment_distances(pts, seg[None, :, :])
        hit = (dist[:, 0] <= radius).reshape(ys.shape)
        bits[y0 : y1 + 1, x0 : x1 + 1] |= hit


def rasterize(
    g: RoadGraph, line_width: float, extent: tuple[float, float] | None = None
) -> RasterMap:
    extent = extent or g.extent
    height, width = raster_shape(extent)
    bits = np.zeros((height, width), dtype=bool)
    if g.edges:
        burn_segments(bits, g.segments(), line_width / 2.0)
    return RasterMap(width=width, height=height, bits=bits)


def nearest_point_on_graph(g: RoadGraph, p: Point) -> tuple[Point, int, float]:
    """Closest centerline point; ties go to the lowest edge id."""
    if not g.edges:
        raise NoCenterlineError()
    point, edge_id, dist, _ = nearest_projection(g, p)
    return point, edge_id, dist


def nearest_projection(g: RoadGraph, p: Point) -> tuple[Point, int, float, float]:
    """Like :func:`nearest_point_on_graph` but also returns the parametric t."""
    if not g.edges:
        raise NoCenterlineError()
    dist, t, foot = point_segment_distances([p], g.segments())
    row = dist[0]
    edge_id = int(np.flatnonzero(row <= row.min() + TIE_EPS)[0])
    fx, fy = foot[0, edge_id]
    return (float(fx), float(fy)), edge_id, float(row[edge_id]), float(t[0, edge_id])


def nearest_node_within(
    items: Iterable[tuple[int, Point]], p: Point, tol: float, exclude: Collection[int] = ()
) -> int | None:
    best: tuple[float, int] | None = None
    for node_id, (x, y) in sorted(items):
        if node_id in exclude:
            continue
        d = math.hypot(x - p[0], y - p[1])
        if d <= tol and (best is None or d < best[0] - TIE_EPS):
            best = (d, node_id)
    return best[1] if best else None


def check_node_connection(
    g: RoadGraph, p: Point, tol: float = 2.0, exclude: Collection[int] = ()
) -> int | None:
    """Nearest node within ``tol`` (inclusive), ties by lowest id."""
    return nearest_node_within(((n.id, n.xy) for n in g.nodes), p, tol, exclude)


def merge_graphs(a: RoadGraph, b: RoadGraph, snap_tol: float = 2.0) -> RoadGraph:
    """Union of two graphs in one frame.

    A node of ``b`` within ``snap_tol`` of a node of ``a`` (nearest, then
    lowest id) is unified with it at the position of the ``a`` node. The
    unified node keeps the lower of the two ids unless another node of ``a``
    already holds it.
    """
    extent = (max(a.extent[0], b.extent[0]), max(a.extent[1], b.extent[1]))
    a_ids = a.node_ids
    tree = cKDTree(a.coords()) if a.nodes else None
    snapped: dict[int, int] = {}
    for n in b.nodes:
        if tree is None:
            break
        hits = tree.query_ball_point([n.x, n.y], r=snap_tol)
        if hits:
            snapped[n.id] = min(
                (math.hypot(a.nodes[i].x - n.x, a.nodes[i].y - n.y), a_ids[i]) for i in hits
            )[1]

    survivor = {i: i for i in a_ids}
    used_ids = set(a_ids)
    for b_id, a_id in sorted(snapped.items()):
        current = survivor[a_id]
        if b_id < current and b_id not in used_ids:
            used_ids.discard(current)
            used_ids.add(b_id)
            survivor[a_id] = b_id

    builder = GraphBuilder(extent)
    for n in a.nodes:
        builder.add_node(n.x, n.y, node_id=survivor[n.id])
    for u, v in a.edge_list:
        builder.add_edge(survivor[u], survivor[v])
    mapping = {b_id: survivor[a_id] for b_id, a_id in snapped.items()}
    for n in b.nodes:
        if n.id in mapping:
            continue
        new_id = n.id if n.id not in used_ids else max(used_ids) + 1
        builder.add_node(n.x, n.y, node_id=new_id)
        used_ids.add(new_id)
        mapping[n.id] = new_id
    for u, v in b.edge_list:
        mu, mv = mapping[u], mapping[v]
        if mu != mv:
            builder.add_edge(mu, mv)
    return builder.build()


def densify(g: RoadGraph, step: float) -> RoadGraph:
    """Insert evenly spaced degree-2 nodes so no edge is longer than ``step``."""
    builder = GraphBuilder.from_graph(g)
    next_id = g.next_id()
    for u, v in g.edge_list:
        length = g.edge_length(u, v)
        k = int(math.ceil(length / step))
        if k <= 1:
            continue
        builder.remove_edge(u, v)
        (ux, uy), (vx, vy) = g.position(u), g.position(v)
        prev = u
        for j in range(1, k):
            f = j / k
            builder.add_node(ux + f * (vx - ux), uy + f * (vy - uy), node_id=next_id)
            builder.add_edge(prev, next_id)
            prev = next_id
            next_id += 1
        builder.add_edge(prev, v)
    return builder.build()


def edge_chains(g: RoadGraph) -> list[list[int]]:
    """Maximal node paths whose interior nodes all have degree 2.

    Pure cycles come back closed (first id repeated at the end), starting at
    their lowest id.
    """
    seen: set[tuple[int, int]] = set()
    chains: list[list[int]] = []

    def walk(start: int, nxt: int) -> list[int]:
        chain = [start, nxt]
        seen.add(edge_key(start, nxt))
        prev, cur = start, nxt
        while g.degree(cur) == 2 and cur != start:
            a, b = g.neighbors(cur)
            step = b if a == prev else a
            key = edge_key(cur, step)
            if key in seen:
                break
            seen.add(key)
            chain.append(step)
            prev, cur = cur, step
        return chain

    for n in g.nodes:
        if g.degree(n.id) == 2:
            continue
        for nb in g.neighbors(n.id):
            if edge_key(n.id, nb) not in seen:
                chains.append(walk(n.id, nb))
    for n in g.nodes:
        for nb in g.neighbors(n.id):
            if edge_key(n.id, nb) not in seen:
                chains.append(walk(n.id, nb))
    return chains


def chain_points(g: RoadGraph, chain: Sequence[int]) -> list[Point]:
    return [g.position(i) for i in chain]
