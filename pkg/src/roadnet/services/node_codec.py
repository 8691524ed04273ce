from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..core.errors import (
    ConfigError,
    OutOfExtentError,
    ShapeMismatchError,
    ZeroLengthDirectionError,
)
from ..domain.descriptor import DEFAULT_BINS, NodeDescriptor, NodeFeature
from ..domain.graph import Point, RoadGraph

# Interval sweep supported by the codec: 30, 22.5, 15, 10, 5, 2.5 and 0.5 degrees.
SUPPORTED_BINS = (12, 16, 24, 36, 72, 144, 720)


def direction_angle(origin: Point, target: Point) -> float:
    """Counterclockwise angle in [0, 360) with the image y axis pointing down."""
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    if dx == 0.0 and dy == 0.0:
        raise ZeroLengthDirectionError()
    return math.degrees(math.atan2(-dy, dx)) % 360.0


class DirectionCodec:
    """Quantises neighbour directions into ``n_bins`` equal angular bins.

    Bin k is centred on ``k * 360 / n_bins`` degrees; angles go to the nearest
    bin centre, wrapping at 360.
    """

    def __init__(self, n_bins: int = DEFAULT_BINS) -> None:
        if n_bins not in SUPPORTED_BINS and (n_bins < 4 or 360 % n_bins):
            raise ConfigError(f"unsupported bin count {n_bins}")
        self.n_bins = n_bins
        self.bin_width = 360.0 / n_bins

    @property
    def feature_size(self) -> int:
        return 2 + self.n_bins

    def bin_of(self, angle: float) -> int:
        return int(math.floor(angle / self.bin_width + 0.5)) % self.n_bins

    def encode(self, node: Point, neighbors: Sequence[Point]) -> NodeDescriptor:
        bins = np.zeros(self.n_bins, dtype=np.float64)
        for nb in neighbors:
            bins[self.bin_of(direction_angle(node, nb))] = 1.0
        return NodeDescriptor(coord=(float(node[0]), float(node[1])), bins=bins)

    def decode(self, d: NodeDescriptor, threshold: float = 0.5) -> list[float]:
        if not 0.0 < threshold < 1.0:
            raise ConfigError("decode threshold must lie in (0, 1)")
        self._check(d)
        return [k * self.bin_width for k in np.flatnonzero(d.bins >= threshold)]

    def feature(self, d: NodeDescriptor, extent: tuple[float, float]) -> NodeFeature:
        self._check(d)
        w, h = extent
        x, y = d.coord
        if not (0.0 <= x <= w and 0.0 <= y <= h):
            raise OutOfExtentError(f"node at ({x}, {y}) outside extent {extent}")
        return np.concatenate([[x / w, y / h], d.bins])

    def _check(self, d: NodeDescriptor) -> None:
        if d.n_bins != self.n_bins:
            raise ShapeMismatchError(
                f"descriptor has {d.n_bins} bins, codec expects {self.n_bins}"
            )


_DEFAULT = DirectionCodec()


def encode_directions(node: Point, neighbors: Sequence[Point]) -> NodeDescriptor:
    return _DEFAULT.encode(node, neighbors)


def decode_directions(d: NodeDescriptor, threshold: float = 0.5) -> list[float]:
    return _DEFAULT.decode(d, threshold)


def node_feature(d: NodeDescriptor, extent: tuple[float, float]) -> NodeFeature:
    return _DEFAULT.feature(d, extent)


def descriptors_from_graph(
    g: RoadGraph, codec: DirectionCodec | None = None
) -> dict[int, NodeDescriptor]:
    """Ground-truth (binary) descriptors for every node, keyed by node id."""
    codec = codec or _DEFAULT
    return {
        n.id: codec.encode(n.xy, [g.position(nb) for nb in g.neighbors(n.id)]) for n in g.nodes
    }
