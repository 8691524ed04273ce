"""Node proposers standing in for a learned local decoder."""

from __future__ import annotations

import math
from collections.abc import Iterator

import numpy as np

from ..domain.completion import PATCH_SIZE, ProposedNode, ProposerPatch
from ..domain.graph import Point, RoadGraph
from .road_graph import nearest_projection

MAX_NODES = 4
ON_ROAD = 2.5
WALK_STEP = 0.5
LOOKAHEAD_STRIDES = 2.0
VERTEX_EPS = 1e-9


def _along(pts: list[Point], step: float) -> Iterator[tuple[float, Point]]:
    """(arc, point) every ``step`` px along a polyline, excluding its start."""
    arc = 0.0
    base = 0.0
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        seg = math.hypot(bx - ax, by - ay)
        while seg > 0 and arc + step <= base + seg + 1e-12:
            arc += step
            f = (arc - base) / seg
            yield arc, (ax + f * (bx - ax), ay + f * (by - ay))
        base += seg


def _point_at(pts: list[Point], target: float) -> Point:
    base = 0.0
    for (ax, ay), (bx, by) in zip(pts, pts[1:]):
        seg = math.hypot(bx - ax, by - ay)
        if base + seg >= target and seg > 0:
            f = (target - base) / seg
            return (ax + f * (bx - ax), ay + f * (by - ay))
        base += seg
    return pts[-1]


def _length(pts: list[Point]) -> float:
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))


def _to_patch(patch: ProposerPatch, p: Point, prob: float) -> ProposedNode:
    lx, ly = patch.to_local(p)
    hi = PATCH_SIZE - 1e-6
    return ProposedNode(min(max(lx, 0.0), hi), min(max(ly, 0.0), hi), prob)


def _pick_arc(
    patch: ProposerPatch, samples: Iterator[tuple[float, Point]], stride: float, total: float
) -> float | None:
    """Arc length to emit at along one walking direction, or None if explored.

    A direction is explored when the raster stays set over the first few px.
    Otherwise the target is one px past the point where the walk re-enters
    the raster, split into equal steps of at most ``stride``; without a
    re-entry in sight the walk moves ``stride`` (or to the end of the path).
    """
    settle = min(3.0, stride / 2.0)
    left = False
    for arc, q in samples:
        inside = patch.raster_at(patch.to_local(q))
        if not left:
            if not inside:
                left = True
            elif arc >= settle:
                return None
        elif inside:
            reach = min(arc + 1.0, total)
            return reach / math.ceil(reach / stride)
    if not left:
        return None
    return min(stride, total)


class OracleProposer:
    """Walks the ground truth from the patch centre into unexplored directions."""

    def __init__(
        self, gt: RoadGraph, sigma: float = 0.0, stride: float = 10.0, seed: int = 0
    ) -> None:
        self.gt = gt
        self.sigma = sigma
        self.stride = stride
        self.rng = np.random.default_rng(seed)

    def _trace(self, start: Point, prev: int, node: int, limit: float) -> list[Point]:
        pts = [start]
        total = 0.0
        while True:
            p = self.gt.position(node)
            seg = math.hypot(p[0] - pts[-1][0], p[1] - pts[-1][1])
            if total + seg >= limit:
                pts.append(_point_at([pts[-1], p], limit - total))
                return pts
            pts.append(p)
            total += seg
            if self.gt.degree(node) != 2:
                return pts
            a, b = self.gt.neighbors(node)
            prev, node = node, (b if a == prev else a)

    def _directions(self, point: Point, edge_id: int, t: float) -> list[tuple[Point, int, int]]:
        x, y = self.gt.edge_list[edge_id]
        if t <= VERTEX_EPS or t >= 1.0 - VERTEX_EPS:
            v = x if t <= VERTEX_EPS else y
            return [(self.gt.position(v), v, nb) for nb in self.gt.neighbors(v)]
        return [(point, y, x), (point, x, y)]

    def propose(self, patch: ProposerPatch) -> list[ProposedNode]:
        if not self.gt.edges:
            return []
        point, edge_id, dist, t = nearest_projection(self.gt, patch.center)
        if dist > ON_ROAD:
            return []
        limit = self.stride * LOOKAHEAD_STRIDES
        out: list[ProposedNode] = []
        for start, prev, node in self._directions(point, edge_id, t):
            pts = self._trace(start, prev, node, limit)
            total = _length(pts)
            arc = _pick_arc(patch, _along(pts, WALK_STEP), self.stride, total)
            if arc is None:
                continue
            gx, gy = _point_at(pts, arc)
            if self.sigma > 0:
                dx, dy = self.rng.normal(0.0, self.sigma, size=2)
                gx, gy = gx + float(dx), gy + float(dy)
            out.append(_to_patch(patch, (gx, gy), 1.0))
            if len(out) == MAX_NODES:
                break
        return out


class HeuristicProposer:
    """Extends the endpoint's tangent when the image looks like road ahead."""

    def __init__(
        self,
        stride: float = 10.0,
        threshold: float = 0.5,
        radius: float = 6.0,
        channel: int = 0,
    ) -> None:
        self.stride = stride
        self.threshold = threshold
        self.radius = radius
        self.channel = channel

    def tangent(self, patch: ProposerPatch) -> tuple[float, float] | None:
        cx, cy = patch.local_center
        ys, xs = np.nonzero(patch.raster[0] > 0.5)
        if not len(xs):
            return None
        dx, dy = xs - cx, ys - cy
        near = np.hypot(dx, dy) <= self.radius
        if not near.any():
            return None
        mx, my = float(dx[near].mean()), float(dy[near].mean())
        norm = math.hypot(mx, my)
        if norm < 0.5:
            return None
        return -mx / norm, -my / norm

    def propose(self, patch: ProposerPatch) -> list[ProposedNode]:
        direction = self.tangent(patch)
        if direction is None:
            return []
        cx, cy = patch.center
        reach = self.stride * LOOKAHEAD_STRIDES
        pts = [(cx, cy), (cx + reach * direction[0], cy + reach * direction[1])]
        ahead = [
            patch.intensity_at(patch.to_local(q), self.channel)
            for arc, q in _along(pts, WALK_STEP)
            if arc <= self.stride
        ]
        if not ahead or float(np.mean(ahead)) < self.threshold:
            return []
        arc = _pick_arc(patch, _along(pts, WALK_STEP), self.stride, reach)
        if arc is None:
            return []
        return [_to_patch(patch, _point_at(pts, arc), 1.0)]
