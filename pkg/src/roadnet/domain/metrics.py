from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Literal

from ..core.errors import ConfigError
from .graph import Point


@dataclass(slots=True, frozen=True)
class TopoConfig:
    seed_spacing: float = 20.0
    match_radius: float = 8.0
    angle_tolerance: float = 30.0
    propagation_radius: float = 100.0
    hole_spacing: float = 5.0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(slots=True, frozen=True)
class AplsConfig:
    mode: Literal["harmonic", "paper_verbatim"] = "harmonic"
    samples: int = 500
    exhaustive_limit: int = 50
    snap_radius: float = 5.0
    densify_step: float | None = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples < 1 or self.snap_radius <= 0:
            raise ConfigError("APLS needs at least one sample and a positive snap radius")
        if self.densify_step is not None and self.densify_step <= 0:
            raise ConfigError("densify step must be positive")


@dataclass(slots=True, frozen=True)
class Seed:
    point: Point
    angle: float  # tangent direction in degrees, folded to [0, 180)
    edge: tuple[int, int]


@dataclass(slots=True, frozen=True)
class SeedDetail:
    point: Point
    matched: bool
    gt_holes: int = 0
    pred_holes: int = 0
    matched_gt: int = 0
    matched_pred: int = 0


@dataclass(slots=True, frozen=True)
class TopoResult:
    precision: float
    recall: float
    f1: float
    seeds: list[SeedDetail]


@dataclass(slots=True, frozen=True)
class PairDetail:
    u: int
    v: int
    length_a: float
    length_b: float | None  # None when unmatched or disconnected in b
    penalty: float


@dataclass(slots=True)
class MetricReport:
    topo_p: float
    topo_r: float
    topo_f1: float
    apls: float
    apls_gt_to_pred: float = 0.0
    apls_pred_to_gt: float = 0.0
    per_seed: list[SeedDetail] = field(default_factory=list)
    per_pair: list[PairDetail] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.topo_p, self.topo_r, self.topo_f1, self.apls)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def harmonic_f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0
