from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt

from ..core.errors import ConfigError
from .graph import Point

PATCH_SIZE = 128
PATCH_HALF = PATCH_SIZE // 2


@dataclass(slots=True, frozen=True, eq=False)
class ProposerPatch:
    """Aligned image/raster crops around a query center.

    Patch-local coordinates are ``global - origin``; the integer origin is
    ``round(center) - 64`` so an integral center sits at (64, 64).
    """

    center: Point
    origin: tuple[int, int]
    image: npt.NDArray[np.float64]  # (C, 128, 128)
    raster: npt.NDArray[np.float64]  # (1, 128, 128), 1.0 where M_road is set

    def to_local(self, p: Point) -> Point:
        return (p[0] - self.origin[0], p[1] - self.origin[1])

    def to_global(self, p: Point) -> Point:
        return (p[0] + self.origin[0], p[1] + self.origin[1])

    @property
    def local_center(self) -> Point:
        return self.to_local(self.center)

    def raster_at(self, local: Point) -> bool:
        u, v = int(np.floor(local[0] + 0.5)), int(np.floor(local[1] + 0.5))
        if 0 <= u < PATCH_SIZE and 0 <= v < PATCH_SIZE:
            return bool(self.raster[0, v, u] > 0.5)
        return False

    def intensity_at(self, local: Point, channel: int = 0) -> float:
        u, v = int(np.floor(local[0] + 0.5)), int(np.floor(local[1] + 0.5))
        if 0 <= u < PATCH_SIZE and 0 <= v < PATCH_SIZE:
            return float(self.image[channel, v, u])
        return 0.0


@dataclass(slots=True, frozen=True)
class ProposedNode:
    """Proposer output in patch-local coordinates."""

    x: float
    y: float
    prob: float


class StepAction(str, Enum):
    BRIDGE = "bridge"
    EXTEND = "extend"
    BRANCH = "branch"
    STOP = "stop"


@dataclass(slots=True, frozen=True)
class TraceEvent:
    step: int
    center: Point
    proposed: tuple[tuple[float, float, float], ...]  # global x, y, prob
    action: StepAction
    added_nodes: tuple[int, ...] = ()
    added_edges: tuple[tuple[int, int], ...] = ()


@dataclass(slots=True)
class CompletionTrace:
    events: list[TraceEvent] = field(default_factory=list)
    proposer_calls: int = 0
    initial_frontier: int = 0
    pushed: int = 0

    def added_edges(self) -> list[tuple[int, int]]:
        return [e for ev in self.events for e in ev.added_edges]

    def count(self, action: StepAction) -> int:
        return sum(1 for ev in self.events if ev.action is action)


@dataclass(slots=True, frozen=True)
class CompletionConfig:
    max_steps: int = 5
    snap_tol: float = 2.0
    proposal_threshold: float = 0.5
    continue_on_branch: bool = False
    max_pushed: int = 256
    raster_width: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if not 0.0 < self.proposal_threshold < 1.0:
            raise ConfigError("proposal threshold must lie in (0, 1)")
        if self.snap_tol < 0 or self.max_pushed < 0 or self.raster_width <= 0:
            raise ConfigError("snap tolerance, push budget and raster width must be non-negative")


@dataclass(slots=True, frozen=True, eq=False)
class LocalSample:
    """A supervised local-stage example: a patch and its continuation nodes (patch-local)."""

    patch: ProposerPatch
    targets: tuple[Point, ...]
