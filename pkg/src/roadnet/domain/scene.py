from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from ..core.errors import ConfigError
from .graph import Point, RoadGraph


@dataclass(slots=True, frozen=True)
class SceneSpec:
    """Lattice road scene. ``comb`` keeps a single trunk with one branch per row."""

    layout: Literal["grid", "comb"] = "grid"
    extent: tuple[int, int] = (512, 512)
    pitch: float = 64.0
    jitter: float = 0.0
    drop_rate: float = 0.0
    curve_amplitude: float = 0.0
    road_width: float = 5.0
    road_brightness: float = 0.9
    background_brightness: float = 0.2
    texture: float = 0.05
    noise_channels: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ConfigError(f"extent must be positive, got {self.extent}")
        if self.pitch <= 0:
            raise ConfigError("pitch must be positive")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigError("drop rate must lie in [0, 1)")
        if self.jitter < 0 or self.noise_channels < 0:
            raise ConfigError("jitter and noise channels must be non-negative")


@dataclass(slots=True, frozen=True)
class Gap:
    """A removed interior sub-segment and the two endpoints it left behind."""

    edge: tuple[int, int]
    start: Point
    end: Point
    endpoint_ids: tuple[int, int]
    length: float


@dataclass(slots=True)
class Fragmentation:
    residual: RoadGraph
    gaps: list[Gap] = field(default_factory=list)
