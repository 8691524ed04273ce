from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Protocol

from ..domain.completion import ProposedNode, ProposerPatch
from ..domain.graph import RoadGraph


class NodeProposer(Protocol):
    """Patch in, 0-4 patch-local node proposals out."""

    def propose(
        self, patch: ProposerPatch
    ) -> Sequence[ProposedNode]:  # pragma: no cover - protocol
        ...


class GraphStore(Protocol):
    def load(self, path: Path) -> RoadGraph:  # pragma: no cover - protocol
        ...

    def save(self, graph: RoadGraph, path: Path) -> None:  # pragma: no cover
        ...
