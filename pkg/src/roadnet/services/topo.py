from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ..domain.graph import Point, RoadGraph, edge_key
from ..domain.metrics import Seed, SeedDetail, TopoConfig, TopoResult, harmonic_f1
from .apls import PathLengths
from .road_graph import TIE_EPS, edge_chains, point_segment_distances

INF = math.inf


def _fold(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(-dy, dx)) % 180.0


def angle_difference(a: float, b: float) -> float:
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def sample_seeds(gt: RoadGraph, spacing: float) -> list[Seed]:
    """Evenly spaced seeds along every edge chain, chain ends included once."""
    seeds: list[Seed] = []
    seeded_nodes: set[int] = set()
    for chain in edge_chains(gt):
        pts = np.array([gt.position(i) for i in chain])
        seg_len = np.hypot(*np.diff(pts, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        total = float(cum[-1])
        k = max(1, int(math.floor(total / spacing + 0.5)))
        for j in range(k + 1):
            if j in (0, k):
                node = chain[0] if j == 0 else chain[-1]
                if node in seeded_nodes:
                    continue
                seeded_nodes.add(node)
                seg = 0 if j == 0 else len(chain) - 2
                point = gt.position(node)
            else:
                s = j * total / k
                seg = min(int(np.searchsorted(cum, s, side="right")) - 1, len(chain) - 2)
                f = (s - cum[seg]) / seg_len[seg] if seg_len[seg] > 0 else 0.0
                point = (
                    float(pts[seg, 0] + f * (pts[seg + 1, 0] - pts[seg, 0])),
                    float(pts[seg, 1] + f * (pts[seg + 1, 1] - pts[seg, 1])),
                )
            d = pts[seg + 1] - pts[seg]
            edge = edge_key(chain[seg], chain[seg + 1])
            seeds.append(Seed(point=point, angle=_fold(d[0], d[1]), edge=edge))
    return seeds


def holes(
    paths: PathLengths, edge: tuple[int, int], point: Point, radius: float, spacing: float
) -> npt.NDArray[np.float64]:
    """Hole positions reachable from ``point`` on ``edge`` within ``radius`` along the graph.

    Holes sit on every node and at ``ceil(len / spacing)`` equal steps inside
    every edge.
    """
    g = paths.graph
    u, v = edge_key(*edge)
    (ux, uy), (vx, vy) = g.position(u), g.position(v)
    length = math.hypot(vx - ux, vy - uy)
    s = min(max(math.hypot(point[0] - ux, point[1] - uy), 0.0), length)
    from_u, from_v = paths.from_node(u), paths.from_node(v)

    def node_distance(n: int) -> float:
        return min(s + from_u.get(n, INF), length - s + from_v.get(n, INF))

    dist = {n: node_distance(n) for n in set(from_u) | set(from_v)}
    out: list[Point] = [g.position(n) for n in sorted(dist) if dist[n] <= radius]
    for x, y in g.edge_list:
        dx, dy = dist.get(x, INF), dist.get(y, INF)
        start_edge = (x, y) == (u, v)
        if min(dx, dy) > radius and not start_edge:
            continue
        (px, py), (qx, qy) = g.position(x), g.position(y)
        seg = math.hypot(qx - px, qy - py)
        k = max(1, int(math.ceil(seg / spacing)))
        for j in range(1, k):
            q = j * seg / k
            d = min(dx + q, dy + seg - q)
            if start_edge:
                d = min(d, abs(q - s))
            if d <= radius:
                f = q / seg
                out.append((px + f * (qx - px), py + f * (qy - py)))
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def match_count(a: npt.NDArray[np.float64], b: npt.NDArray[np.float64], radius: float) -> int:
    """Maximum one-to-one matching between two hole sets within ``radius``."""
    if not len(a) or not len(b):
        return 0
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    adjacency = csr_matrix((d <= radius).astype(np.int8))
    matched = maximum_bipartite_matching(adjacency, perm_type="column")
    return int((matched >= 0).sum())


def _match_seed(
    seed: Seed, segments: npt.NDArray[np.float64], angles: npt.NDArray[np.float64], cfg: TopoConfig
) -> tuple[int, Point] | None:
    if not len(segments):
        return None
    dist, _, foot = point_segment_distances([seed.point], segments)
    diff = np.abs(angles - seed.angle) % 180.0
    diff = np.minimum(diff, 180.0 - diff)
    ok = (dist[0] <= cfg.match_radius) & (diff <= cfg.angle_tolerance)
    if not ok.any():
        return None
    row = np.where(ok, dist[0], np.inf)
    edge_id = int(np.flatnonzero(row <= row.min() + TIE_EPS)[0])
    return edge_id, (float(foot[0, edge_id, 0]), float(foot[0, edge_id, 1]))


def topo(gt: RoadGraph, pred: RoadGraph, cfg: TopoConfig | None = None) -> TopoResult:
    """Seed-and-propagate hole matching; holes pair up within ``hole_spacing``."""
    cfg = cfg or TopoConfig()
    seeds = sample_seeds(gt, cfg.seed_spacing)
    gt_paths, pred_paths = PathLengths(gt), PathLengths(pred)
    segments = pred.segments()
    angles = np.array([_fold(*(s[1] - s[0])) for s in segments])
    total_gt = total_pred = matched_gt = matched_pred = 0
    details: list[SeedDetail] = []
    for seed in seeds:
        gt_holes = holes(gt_paths, seed.edge, seed.point, cfg.propagation_radius, cfg.hole_spacing)
        hit = _match_seed(seed, segments, angles, cfg)
        if hit is None:
            total_gt += len(gt_holes)
            details.append(SeedDetail(seed.point, False, gt_holes=len(gt_holes)))
            continue
        edge_id, start = hit
        pred_holes = holes(
            pred_paths, pred.edge_list[edge_id], start, cfg.propagation_radius, cfg.hole_spacing
        )
        m = match_count(gt_holes, pred_holes, cfg.hole_spacing)
        total_gt += len(gt_holes)
        total_pred += len(pred_holes)
        matched_gt += m
        matched_pred += m
        details.append(SeedDetail(seed.point, True, len(gt_holes), len(pred_holes), m, m))
    precision = matched_pred / total_pred if total_pred else 0.0
    recall = matched_gt / total_gt if total_gt else 0.0
    return TopoResult(precision, recall, harmonic_f1(precision, recall), details)
