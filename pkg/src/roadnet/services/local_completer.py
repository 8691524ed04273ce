"""Iterative local completion: walk from road endpoints, ask a proposer, repair gaps."""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
from shapely.geometry import LineString
from shapely.ops import substring

from ..core.errors import ContractViolationError, EmptyBatchError, OutOfExtentError
from ..core.logging import get_logger
from ..core.observability import EDGES_ADDED, PROPOSER_CALLS, stage
from ..domain.completion import (
    PATCH_HALF,
    PATCH_SIZE,
    CompletionConfig,
    CompletionTrace,
    LocalSample,
    ProposedNode,
    ProposerPatch,
    StepAction,
    TraceEvent,
)
from ..domain.graph import GraphBuilder, Point, RasterMap, RoadGraph
from ..repositories.ports import NodeProposer
from .losses import local_stage_loss
from .road_graph import (
    burn_segments,
    chain_points,
    edge_chains,
    endpoints,
    nearest_node_within,
    rasterize,
)

log = get_logger(__name__)

MAX_PROPOSALS = 4
SAMPLE_RASTER_WIDTH = 2.0


def build_query_centers(g: RoadGraph) -> list[int]:
    return sorted(endpoints(g))


def patch_origin(center: Point) -> tuple[int, int]:
    return (
        int(math.floor(center[0] + 0.5)) - PATCH_HALF,
        int(math.floor(center[1] + 0.5)) - PATCH_HALF,
    )


def _window(array: npt.NDArray[np.float64], origin: tuple[int, int]) -> npt.NDArray[np.float64]:
    """Zero-padded (C, 128, 128) window of a (C, H, W) array at ``origin``."""
    channels, height, width = array.shape
    out = np.zeros((channels, PATCH_SIZE, PATCH_SIZE), dtype=np.float64)
    ox, oy = origin
    x0, y0 = max(ox, 0), max(oy, 0)
    x1, y1 = min(ox + PATCH_SIZE, width), min(oy + PATCH_SIZE, height)
    if x0 < x1 and y0 < y1:
        out[:, y0 - oy : y1 - oy, x0 - ox : x1 - ox] = array[:, y0:y1, x0:x1]
    return out


def crop_patch(
    image: npt.NDArray[np.float64],
    raster: RasterMap | npt.NDArray[np.bool_],
    center: Point,
) -> ProposerPatch:
    """Aligned image and raster crops around ``center``, zero outside the canvas."""
    bits = raster.bits if isinstance(raster, RasterMap) else raster
    height, width = bits.shape
    if image.ndim != 3 or image.shape[1:] != (height, width):
        raise OutOfExtentError(f"image shape {image.shape} does not match raster {bits.shape}")
    cx, cy = center
    if not (0.0 <= cx <= width and 0.0 <= cy <= height):
        raise OutOfExtentError(f"query center ({cx}, {cy}) outside canvas {width}x{height}")
    origin = patch_origin(center)
    return ProposerPatch(
        center=(float(cx), float(cy)),
        origin=origin,
        image=_window(np.asarray(image, dtype=np.float64), origin),
        raster=_window(bits[None].astype(np.float64), origin),
    )


def check_contract(nodes: Sequence[ProposedNode]) -> list[ProposedNode]:
    if len(nodes) > MAX_PROPOSALS:
        raise ContractViolationError(f"proposer returned {len(nodes)} nodes, at most 4 allowed")
    for node in nodes:
        if not all(math.isfinite(v) for v in (node.x, node.y, node.prob)):
            raise ContractViolationError(f"non-finite proposal {node}")
        if not (0.0 <= node.x < PATCH_SIZE and 0.0 <= node.y < PATCH_SIZE):
            raise ContractViolationError(
                f"proposal ({node.x}, {node.y}) outside patch [0, {PATCH_SIZE})"
            )
        if not 0.0 <= node.prob <= 1.0:
            raise ContractViolationError(f"proposal probability {node.prob} outside [0, 1]")
    return list(nodes)


class _Completion:
    """Mutable state of one completion run: working graph, raster, frontier."""

    def __init__(
        self,
        g: RoadGraph,
        image: npt.NDArray[np.float64],
        proposer: NodeProposer,
        config: CompletionConfig,
    ) -> None:
        self.image = image
        self.proposer = proposer
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.builder = GraphBuilder.from_graph(g)
        self.width, self.height = g.extent
        self.bits = rasterize(g, config.raster_width).bits
        self.frontier: deque[int] = deque(build_query_centers(g))
        self.trace = CompletionTrace(initial_frontier=len(self.frontier))

    def _connect(self, a: int, b: int) -> None:
        if a != b and self.builder.add_edge(a, b):
            seg = np.array([[self.builder.position(a), self.builder.position(b)]])
            burn_segments(self.bits, seg, self.config.raster_width / 2.0)

    def _place(self, source: int, p: Point) -> tuple[int, bool]:
        """Snap ``p`` onto an existing node or add it; returns (node id, created)."""
        hit = nearest_node_within(self.builder.items(), p, self.config.snap_tol, exclude={source})
        if hit is not None:
            self._connect(source, hit)
            return hit, False
        node = self.builder.add_node(p[0], p[1])
        self._connect(source, node)
        return node, True

    def _accepted(self, patch: ProposerPatch, nodes: list[ProposedNode]) -> list[Point]:
        out: list[Point] = []
        for node in nodes:
            gx, gy = patch.to_global((node.x, node.y))
            if node.prob >= self.config.proposal_threshold and (
                0.0 <= gx <= self.width and 0.0 <= gy <= self.height
            ):
                out.append((gx, gy))
        return out

    def _record(
        self,
        step: int,
        patch: ProposerPatch,
        nodes: list[ProposedNode],
        action: StepAction,
        added: list[int],
        edges: list[tuple[int, int]],
    ) -> None:
        proposed = tuple((*patch.to_global((n.x, n.y)), n.prob) for n in nodes)
        self.trace.events.append(
            TraceEvent(step, patch.center, proposed, action, tuple(added), tuple(edges))
        )
        EDGES_ADDED.inc(len(edges))

    def walk(self, start: int) -> None:
        vk = start
        for step in range(1, self.config.max_steps + 1):
            patch = crop_patch(self.image, self.bits, self.builder.position(vk))
            nodes = check_contract(self.proposer.propose(patch))
            self.trace.proposer_calls += 1
            PROPOSER_CALLS.inc()
            accepted = self._accepted(patch, nodes)
            if not accepted:
                self._record(step, patch, nodes, StepAction.STOP, [], [])
                return
            if len(accepted) == 1:
                node, created = self._place(vk, accepted[0])
                if not created:
                    self._record(step, patch, nodes, StepAction.BRIDGE, [], [(vk, node)])
                    return
                self._record(step, patch, nodes, StepAction.EXTEND, [node], [(vk, node)])
                vk = node
                continue
            chosen = int(self.rng.integers(len(accepted)))
            placed = [self._place(vk, p) for p in accepted]
            for i, (node, created) in enumerate(placed):
                if i != chosen and created and self.trace.pushed < self.config.max_pushed:
                    self.frontier.append(node)
                    self.trace.pushed += 1
            self._record(
                step,
                patch,
                nodes,
                StepAction.BRANCH,
                [n for n, created in placed if created],
                [(vk, n) for n, _ in placed if n != vk],
            )
            node, created = placed[chosen]
            if not (self.config.continue_on_branch and created):
                return
            vk = node

    def run(self) -> tuple[RoadGraph, CompletionTrace]:
        while self.frontier:
            self.walk(self.frontier.popleft())
        return self.builder.build(), self.trace


def complete(
    g: RoadGraph,
    image: npt.NDArray[np.float64],
    proposer: NodeProposer,
    config: CompletionConfig | None = None,
) -> tuple[RoadGraph, CompletionTrace]:
    """Grow ``g`` from its endpoints until every walk stops or bridges.

    Nodes and edges are only ever added. A single accepted proposal extends
    the walk unless it lands within ``snap_tol`` of an existing node, which
    closes the gap. Several proposals all join the graph; one is chosen at
    random and the others are queued as new query centers.
    """
    config = config or CompletionConfig()
    with stage("complete"):
        result, trace = _Completion(g, image, proposer, config).run()
    log.info(
        "completion_done",
        proposer_calls=trace.proposer_calls,
        added_edges=len(trace.added_edges()),
        bridges=trace.count(StepAction.BRIDGE),
        pushed=trace.pushed,
    )
    return result, trace


def extract_local_samples(
    gt: RoadGraph,
    image: npt.NDArray[np.float64],
    interval: float = 20.0,
    stride: float = 10.0,
) -> list[LocalSample]:
    """Supervised patches taken every ``interval`` px along each gt edge chain.

    The raster holds only the chain walked so far; the target is the chain
    point ``stride`` px further on (or the chain end when closer).
    """
    samples: list[LocalSample] = []
    radius = SAMPLE_RASTER_WIDTH / 2.0
    for chain in edge_chains(gt):
        line = LineString(chain_points(gt, chain))
        total = line.length
        s = interval
        while s < total:
            at = line.interpolate(s)
            center = (at.x, at.y)
            origin = patch_origin(center)
            walked = np.asarray(substring(line, 0.0, s).coords, dtype=np.float64)
            local = walked - np.array(origin, dtype=np.float64)
            bits = np.zeros((PATCH_SIZE, PATCH_SIZE), dtype=bool)
            burn_segments(bits, np.stack([local[:-1], local[1:]], axis=1), radius)
            nxt = line.interpolate(min(s + stride, total))
            patch = ProposerPatch(
                center=center,
                origin=origin,
                image=_window(np.asarray(image, dtype=np.float64), origin),
                raster=bits[None].astype(np.float64),
            )
            samples.append(LocalSample(patch, ((nxt.x - origin[0], nxt.y - origin[1]),)))
            s += interval
    log.debug("local_samples", count=len(samples), chains=len(edge_chains(gt)))
    return samples


def evaluate_proposer(proposer: NodeProposer, samples: Sequence[LocalSample]) -> float:
    """Mean local-stage loss of a proposer over supervised samples."""
    if not samples:
        raise EmptyBatchError("no local samples to score")
    total = 0.0
    for sample in samples:
        nodes = check_contract(proposer.propose(sample.patch))
        loss, _ = local_stage_loss(
            [(n.x, n.y) for n in nodes], [n.prob for n in nodes], sample.targets
        )
        total += loss
    return total / len(samples)
