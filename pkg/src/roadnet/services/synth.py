from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt

from ..core.errors import ConfigError
from ..core.logging import get_logger
from ..domain.graph import Edge, GraphBuilder, RoadGraph, edge_key
from ..domain.scene import Fragmentation, Gap, SceneSpec
from .road_graph import point_segment_distances

log = get_logger(__name__)

CURVE_STEP = 8.0
JITTER_CLIP = 4.0
GAP_MARGIN = 4.0


def _lattice(spec: SceneSpec) -> tuple[npt.NDArray[np.float64], list[Edge]]:
    w, h = spec.extent
    nx_, ny_ = max(1, int(w // spec.pitch)), max(1, int(h // spec.pitch))
    xs = spec.pitch / 2.0 + spec.pitch * np.arange(nx_)
    ys = spec.pitch / 2.0 + spec.pitch * np.arange(ny_)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    edges: list[Edge] = []
    for j in range(ny_):
        for i in range(nx_):
            k = j * nx_ + i
            if spec.layout == "grid":
                if i + 1 < nx_:
                    edges.append((k, k + 1))
                if j + 1 < ny_:
                    edges.append((k, k + nx_))
            elif i == 0:
                # trunk down the first column, one straight branch per row
                if j + 1 < ny_:
                    edges.append((k, k + nx_))
                if nx_ > 1:
                    edges.append((k, k + nx_ - 1))
    return points, edges


def _curve(
    builder: GraphBuilder, a: int, b: int, amplitude: float, rng: np.random.Generator
) -> None:
    (ax, ay), (bx, by) = builder.position(a), builder.position(b)
    length = math.hypot(bx - ax, by - ay)
    k = max(2, int(math.ceil(length / CURVE_STEP)))
    nxv, nyv = -(by - ay) / length, (bx - ax) / length
    sign = 1.0 if rng.random() < 0.5 else -1.0
    w, h = builder.extent
    prev = a
    for j in range(1, k):
        f = j / k
        off = sign * amplitude * math.sin(math.pi * f)
        x = min(max(ax + f * (bx - ax) + off * nxv, 0.0), w)
        y = min(max(ay + f * (by - ay) + off * nyv, 0.0), h)
        nid = builder.add_node(x, y)
        builder.add_edge(prev, nid)
        prev = nid
    builder.add_edge(prev, b)


def generate_graph(spec: SceneSpec, rng: np.random.Generator) -> RoadGraph:
    points, edges = _lattice(spec)
    if spec.jitter > 0:
        bound = JITTER_CLIP * spec.jitter
        points = points + np.clip(rng.normal(0.0, spec.jitter, points.shape), -bound, bound)
    w, h = spec.extent
    points[:, 0] = np.clip(points[:, 0], 0.0, w)
    points[:, 1] = np.clip(points[:, 1], 0.0, h)
    keep = rng.random(len(edges)) >= spec.drop_rate if spec.drop_rate > 0 else [True] * len(edges)
    kept = [e for e, ok in zip(edges, keep) if ok]
    used = sorted({n for e in kept for n in e})

    builder = GraphBuilder((float(w), float(h)))
    for n in used:
        builder.add_node(points[n, 0], points[n, 1], node_id=int(n))
    for a, b in kept:
        if spec.curve_amplitude > 0:
            _curve(builder, a, b, spec.curve_amplitude, rng)
        else:
            builder.add_edge(a, b)
    return builder.build()


def render_image(
    gt: RoadGraph, spec: SceneSpec, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """(C, H, W) image: anti-aliased bright strokes over a textured background."""
    w, h = spec.extent
    half = spec.road_width / 2.0
    dist = np.full((h, w), np.inf)
    for seg in gt.segments():
        x0 = max(int(math.floor(seg[:, 0].min() - half - 1)), 0)
        x1 = min(int(math.ceil(seg[:, 0].max() + half + 1)), w - 1)
        y0 = max(int(math.floor(seg[:, 1].min() - half - 1)), 0)
        y1 = min(int(math.ceil(seg[:, 1].max() + half + 1)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        pts = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
        d, _, _ = point_segment_distances(pts, seg[None])
        window = dist[y0 : y1 + 1, x0 : x1 + 1]
        np.minimum(window, d[:, 0].reshape(ys.shape), out=window)
    coverage = np.clip(half + 0.5 - dist, 0.0, 1.0)
    background = spec.background_brightness + spec.texture * rng.normal(size=(h, w))
    luminance = np.clip(background * (1.0 - coverage) + spec.road_brightness * coverage, 0.0, 1.0)
    channels = [luminance] + [rng.random((h, w)) for _ in range(spec.noise_channels)]
    return np.stack(channels).astype(np.float64)


def generate_scene(spec: SceneSpec) -> tuple[RoadGraph, npt.NDArray[np.float64]]:
    rng = np.random.default_rng(spec.seed)
    gt = generate_graph(spec, rng)
    image = render_image(gt, spec, rng)
    log.info("scene_generated", layout=spec.layout, nodes=len(gt.nodes), edges=len(gt.edges))
    return gt, image


def fragment(
    gt: RoadGraph, n_breaks: int, gap_len: float, rng: np.random.Generator
) -> Fragmentation:
    """Cut ``n_breaks`` interior gaps of ``gap_len`` px out of distinct edges.

    Gaps keep ``GAP_MARGIN`` px clear of both edge ends so no existing node,
    junctions included, is touched.
    """
    if n_breaks < 0 or gap_len <= 0:
        raise ConfigError("n_breaks must be non-negative and gap_len positive")
    if n_breaks == 0:
        return Fragmentation(residual=gt, gaps=[])
    candidates = [e for e in gt.edge_list if gt.edge_length(*e) >= gap_len + 2 * GAP_MARGIN]
    if len(candidates) < n_breaks:
        raise ConfigError(
            f"only {len(candidates)} edges can hold a {gap_len} px gap, {n_breaks} requested"
        )
    chosen = sorted(rng.choice(len(candidates), size=n_breaks, replace=False).tolist())
    builder = GraphBuilder.from_graph(gt)
    next_id = gt.next_id()
    gaps: list[Gap] = []
    for idx in chosen:
        a, b = candidates[idx]
        (ax, ay), (bx, by) = gt.position(a), gt.position(b)
        length = gt.edge_length(a, b)
        s0 = rng.uniform(GAP_MARGIN, length - GAP_MARGIN - gap_len)
        f0, f1 = s0 / length, (s0 + gap_len) / length
        start = (ax + f0 * (bx - ax), ay + f0 * (by - ay))
        end = (ax + f1 * (bx - ax), ay + f1 * (by - ay))
        p = builder.add_node(*start, node_id=next_id)
        q = builder.add_node(*end, node_id=next_id + 1)
        next_id += 2
        builder.remove_edge(a, b)
        builder.add_edge(a, p)
        builder.add_edge(q, b)
        gaps.append(
            Gap(edge=edge_key(a, b), start=start, end=end, endpoint_ids=(p, q), length=gap_len)
        )
    residual = builder.build()
    log.info("scene_fragmented", breaks=n_breaks, gap_len=gap_len)
    return Fragmentation(residual=residual, gaps=gaps)
