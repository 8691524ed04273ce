from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Literal, TypeVar

from pydantic import BaseModel, ValidationError

from ..api.schemas import AdjacencyFile, GraphFile, NodeIn
from ..core.errors import GraphValidationError, ParseError
from ..core.logging import get_logger
from ..domain.graph import GraphBuilder, Node, Point, RoadGraph, edge_key
from .ports import GraphStore

log = get_logger(__name__)

GraphFormat = Literal["edges", "adjacency"]
M = TypeVar("M", bound=BaseModel)


def _where(exc: ValidationError) -> str:
    first = exc.errors()[0]
    loc = ".".join(str(p) for p in first["loc"]) or "<root>"
    return f"{loc}: {first['msg']}"


def read_json(path: Path) -> Any:
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def validate(model: type[M], data: Any, path: Path) -> M:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ParseError(f"{path}: {_where(exc)}") from exc


def read_model(path: Path, model: type[M]) -> M:
    return validate(model, read_json(path), path)


def read_lines(path: Path, model: type[M]) -> list[M]:
    """JSON lines, one model per non-blank line; errors name the line number."""
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    out: list[M] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(model.model_validate_json(line))
        except ValidationError as exc:
            raise ParseError(f"{path}: line {lineno}: {_where(exc)}") from exc
    return out


def write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def write_lines(path: Path, rows: list[BaseModel]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.model_dump_json() + "\n" for r in rows), encoding="utf-8")


# edge-list ----------------------------------------------------------------


def graph_to_model(g: RoadGraph) -> GraphFile:
    return GraphFile(
        extent=g.extent,
        nodes=[NodeIn(id=n.id, x=n.x, y=n.y) for n in g.nodes],
        edges=list(g.edge_list),
    )


def graph_from_model(doc: GraphFile) -> RoadGraph:
    return RoadGraph(
        nodes=tuple(Node(n.id, n.x, n.y) for n in doc.nodes),
        edges=frozenset(edge_key(a, b) for a, b in doc.edges),
        extent=doc.extent,
    )


class EdgeListStore:
    def load(self, path: Path) -> RoadGraph:
        return graph_from_model(read_model(path, GraphFile))

    def save(self, graph: RoadGraph, path: Path) -> None:
        write_json(path, graph_to_model(graph).model_dump(mode="json"))


# adjacency ----------------------------------------------------------------


def _parse_key(key: str) -> Point:
    parts = key.split(",")
    try:
        if len(parts) != 2:
            raise ValueError(key)
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"adjacency key {key!r} is not an 'x,y' coordinate") from exc


def _format_key(p: Point) -> str:
    return f"{p[0]!r},{p[1]!r}"


class AdjacencyStore:
    """Adjacency keyed by coordinates; node ids follow (x, y) order.

    Without an explicit extent, the canvas is the smallest integer box
    holding every node.
    """

    def __init__(self, extent: tuple[float, float] | None = None) -> None:
        self.extent = extent
        self.normalized = 0

    def load(self, path: Path) -> RoadGraph:
        doc = read_model(path, AdjacencyFile)
        listed = {_parse_key(k): [tuple(v) for v in vs] for k, vs in doc.root.items()}
        ids = {p: i for i, p in enumerate(sorted(listed))}
        extent = self.extent
        if extent is None:
            w = max((math.ceil(p[0]) for p in ids), default=0)
            h = max((math.ceil(p[1]) for p in ids), default=0)
            extent = (float(max(w, 1)), float(max(h, 1)))
        builder = GraphBuilder(extent)
        for p, i in ids.items():
            builder.add_node(p[0], p[1], node_id=i)
        declared = {(ids[p], ids[q]) for p, qs in listed.items() for q in qs if q in ids}
        asymmetric = 0
        for p, qs in listed.items():
            for q in qs:
                if q not in ids:
                    raise GraphValidationError(
                        f"adjacency of {_format_key(p)} references unknown node {q}"
                    )
                a, b = ids[p], ids[q]
                if (b, a) not in declared:
                    asymmetric += 1
                builder.add_edge(a, b)
        self.normalized = asymmetric
        if asymmetric:
            log.warning("adjacency_asymmetric", path=str(path), normalized=asymmetric)
        return builder.build()

    def save(self, graph: RoadGraph, path: Path) -> None:
        doc = {
            _format_key(n.xy): [list(graph.position(m)) for m in graph.neighbors(n.id)]
            for n in graph.nodes
        }
        write_json(path, doc)


def _sniff(path: Path) -> GraphFormat:
    data = read_json(path)
    return "edges" if isinstance(data, dict) and "nodes" in data else "adjacency"


def store_for(fmt: GraphFormat, extent: tuple[float, float] | None = None) -> GraphStore:
    return EdgeListStore() if fmt == "edges" else AdjacencyStore(extent)


def load_graph(path: Path, fmt: GraphFormat | None = None) -> RoadGraph:
    return store_for(fmt or _sniff(path)).load(path)


def save_graph(graph: RoadGraph, path: Path, fmt: GraphFormat = "edges") -> None:
    store_for(fmt, graph.extent).save(graph, path)
