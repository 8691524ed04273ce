from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import numpy.typing as npt

from ..core.errors import GraphValidationError

Point = tuple[float, float]
Edge = tuple[int, int]


def edge_key(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(slots=True, frozen=True)
class Node:
    id: int
    x: float
    y: float

    @property
    def xy(self) -> Point:
        return (self.x, self.y)


@dataclass(slots=True, frozen=True)
class RoadGraph:
    """Undirected spatial graph in pixel coordinates.

    Immutable once built; edit through :class:`GraphBuilder`. Edge ids are the
    positions in :attr:`edge_list` (ascending id pairs).
    """

    nodes: tuple[Node, ...]
    edges: frozenset[Edge]
    extent: tuple[float, float]

    _index: dict[int, Node] = field(init=False, repr=False, compare=False)
    _adjacency: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    _edge_list: tuple[Edge, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        w, h = self.extent
        if not (math.isfinite(w) and math.isfinite(h)) or w <= 0 or h <= 0:
            raise GraphValidationError(f"extent must be positive, got {self.extent}")
        ordered = tuple(sorted(self.nodes, key=lambda n: n.id))
        index: dict[int, Node] = {}
        for node in ordered:
            if node.id in index:
                raise GraphValidationError(f"duplicate node id {node.id}")
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise GraphValidationError(f"node {node.id} has non-finite coordinates")
            if not (0.0 <= node.x <= w and 0.0 <= node.y <= h):
                raise GraphValidationError(
                    f"node {node.id} at ({node.x}, {node.y}) outside extent {self.extent}"
                )
            index[node.id] = node
        adjacency: dict[int, list[int]] = {nid: [] for nid in index}
        normalized: set[Edge] = set()
        for a, b in self.edges:
            if a == b:
                raise GraphValidationError(f"self-loop on node {a}")
            if a not in index or b not in index:
                raise GraphValidationError(f"edge ({a}, {b}) references an unknown node")
            key = edge_key(a, b)
            if key in normalized:
                continue
            normalized.add(key)
            adjacency[a].append(b)
            adjacency[b].append(a)
        object.__setattr__(self, "nodes", ordered)
        object.__setattr__(self, "edges", frozenset(normalized))
        object.__setattr__(self, "_index", index)
        object.__setattr__(
            self, "_adjacency", {k: tuple(sorted(v)) for k, v in adjacency.items()}
        )
        object.__setattr__(self, "_edge_list", tuple(sorted(normalized)))

    @classmethod
    def empty(cls, extent: tuple[float, float]) -> RoadGraph:
        return cls(nodes=(), edges=frozenset(), extent=extent)

    @property
    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    @property
    def edge_list(self) -> tuple[Edge, ...]:
        return self._edge_list

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._index

    def node(self, node_id: int) -> Node:
        try:
            return self._index[node_id]
        except KeyError as exc:
            raise GraphValidationError(f"unknown node {node_id}") from exc

    def position(self, node_id: int) -> Point:
        return self.node(node_id).xy

    def neighbors(self, node_id: int) -> tuple[int, ...]:
        self.node(node_id)
        return self._adjacency[node_id]

    def degree(self, node_id: int) -> int:
        return len(self.neighbors(node_id))

    def has_edge(self, a: int, b: int) -> bool:
        return edge_key(a, b) in self.edges

    def edge_length(self, a: int, b: int) -> float:
        (ax, ay), (bx, by) = self.position(a), self.position(b)
        return math.hypot(bx - ax, by - ay)

    def coords(self) -> npt.NDArray[np.float64]:
        """(n, 2) node coordinates in ``nodes`` order."""
        return np.array([n.xy for n in self.nodes], dtype=np.float64).reshape(-1, 2)

    def segments(self) -> npt.NDArray[np.float64]:
        """(m, 2, 2) edge segments in edge-id order."""
        out = np.empty((len(self._edge_list), 2, 2), dtype=np.float64)
        for i, (a, b) in enumerate(self._edge_list):
            out[i, 0] = self.position(a)
            out[i, 1] = self.position(b)
        return out

    def total_length(self) -> float:
        return sum(self.edge_length(a, b) for a, b in self._edge_list)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        for n in self.nodes:
            graph.add_node(n.id, x=n.x, y=n.y)
        for a, b in self._edge_list:
            graph.add_edge(a, b, length=self.edge_length(a, b))
        return graph

    def next_id(self) -> int:
        return self.nodes[-1].id + 1 if self.nodes else 0


class GraphBuilder:
    """Single-writer mutable view used to assemble a new :class:`RoadGraph`."""

    def __init__(self, extent: tuple[float, float]) -> None:
        self.extent = extent
        self._nodes: dict[int, Point] = {}
        self._edges: set[Edge] = set()
        self._seq = 0

    @classmethod
    def from_graph(cls, graph: RoadGraph) -> GraphBuilder:
        builder = cls(graph.extent)
        for n in graph.nodes:
            builder.add_node(n.x, n.y, node_id=n.id)
        for a, b in graph.edge_list:
            builder.add_edge(a, b)
        return builder

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def add_node(self, x: float, y: float, node_id: int | None = None) -> int:
        if node_id is None:
            node_id = self._seq
        if node_id in self._nodes:
            raise GraphValidationError(f"duplicate node id {node_id}")
        self._nodes[node_id] = (float(x), float(y))
        self._seq = max(self._seq, node_id + 1)
        return node_id

    def add_edge(self, a: int, b: int) -> bool:
        """Add an undirected edge; returns False when it already existed."""
        if a == b:
            raise GraphValidationError(f"self-loop on node {a}")
        key = edge_key(a, b)
        if key in self._edges:
            return False
        self._edges.add(key)
        return True

    def remove_edge(self, a: int, b: int) -> None:
        self._edges.discard(edge_key(a, b))

    def position(self, node_id: int) -> Point:
        return self._nodes[node_id]

    def items(self) -> list[tuple[int, Point]]:
        return list(self._nodes.items())

    def degree(self, node_id: int) -> int:
        return sum(1 for e in self._edges if node_id in e)

    def build(self) -> RoadGraph:
        return RoadGraph(
            nodes=tuple(Node(i, x, y) for i, (x, y) in self._nodes.items()),
            edges=frozenset(self._edges),
            extent=self.extent,
        )


def graph_from_edges(
    points: Iterable[Point], edges: Iterable[Edge], extent: tuple[float, float]
) -> RoadGraph:
    """Convenience constructor: node ids are positions in ``points``."""
    return RoadGraph(
        nodes=tuple(Node(i, float(x), float(y)) for i, (x, y) in enumerate(points)),
        edges=frozenset(edge_key(a, b) for a, b in edges),
        extent=extent,
    )


@dataclass(slots=True, frozen=True, eq=False)
class RasterMap:
    """One bit per pixel; pixel (col i, row j) has its center at (i, j)."""

    width: int
    height: int
    bits: npt.NDArray[np.bool_]

    def __post_init__(self) -> None:
        if self.bits.shape != (self.height, self.width):
            raise GraphValidationError(
                f"raster bits shape {self.bits.shape} != ({self.height}, {self.width})"
            )

    def count(self) -> int:
        return int(self.bits.sum())

    def is_set(self, x: float, y: float) -> bool:
        i, j = math.floor(x + 0.5), math.floor(y + 0.5)
        if 0 <= i < self.width and 0 <= j < self.height:
            return bool(self.bits[j, i])
        return False
