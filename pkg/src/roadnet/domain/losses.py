from __future__ import annotations

from dataclasses import dataclass


@dataclass(slots=True, frozen=True)
class LossWeights:
    epoch: int
    direct: float
    connect: float
    g_coord: float = 2.0
    g_reconstruction: float = 1.0
    l_coord: float = 2.0
    prob: float = 5.0
    l_reconstruction: float = 1.0


@dataclass(slots=True, frozen=True)
class GlobalLossParts:
    coord: float
    direct: float
    connect: float
    reconstruction: float


@dataclass(slots=True, frozen=True)
class LocalLossParts:
    coord: float
    prob: float
    reconstruction: float
