from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .graph import Point


@dataclass(slots=True, frozen=True)
class Projection:
    """Foot of a valid node on the ground-truth centerline."""

    node_id: int
    point: Point
    edge_id: int
    t: float  # parametric position along the owning edge, 0 at its lower-id end
    distance: float


@dataclass(slots=True, frozen=True)
class ConnectionLabel:
    v: int
    n: int
    label: int


@dataclass(slots=True)
class ConnectionLabelSet:
    valid_nodes: list[int]
    pairs: list[ConnectionLabel] = field(default_factory=list)

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {(p.v, p.n): p.label for p in self.pairs}

    def positives(self) -> set[tuple[int, int]]:
        return {(min(p.v, p.n), max(p.v, p.n)) for p in self.pairs if p.label == 1}


class Polarity(str, Enum):
    """Denoising band membership"""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    OUT_OF_BAND = "out_of_band"


@dataclass(slots=True, frozen=True)
class NoisedSample:
    origin: int
    offset: tuple[float, float]
    polarity: Polarity
    anchor: tuple[float, float]
