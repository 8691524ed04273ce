from __future__ import annotations

import numpy as np

from ..core.config import BandNorm
from ..core.errors import ConfigError
from ..domain.graph import Point
from ..domain.labels import NoisedSample, Polarity

ANCHOR_EPS = 1e-6


def inverse_sigmoid(x: np.ndarray, eps: float = ANCHOR_EPS) -> np.ndarray:
    x = np.clip(x, eps, 1.0 - eps)
    return np.log(x / (1.0 - x))


def classify_offset(
    offset: tuple[float, float], lam: float, band_norm: BandNorm = "chebyshev"
) -> Polarity:
    if lam <= 0:
        raise ConfigError("noise scale must be positive")
    half = lam / 2.0
    ax, ay = abs(offset[0]), abs(offset[1])
    if band_norm == "per_axis":
        if ax <= half and ay <= half:
            return Polarity.POSITIVE
        if half < ax <= lam and half < ay <= lam:
            return Polarity.NEGATIVE
        return Polarity.OUT_OF_BAND
    m = max(ax, ay)
    if m <= half:
        return Polarity.POSITIVE
    if m <= lam:
        return Polarity.NEGATIVE
    return Polarity.OUT_OF_BAND


def _negative_axis(rng: np.random.Generator, lam: float) -> float:
    # uniform over [-lam, -lam/2) U (lam/2, lam]
    magnitude = lam - rng.uniform(0.0, lam / 2.0)
    return float(magnitude if rng.random() < 0.5 else -magnitude)


def draw_offset(
    polarity: Polarity, lam: float, rng: np.random.Generator, band_norm: BandNorm = "chebyshev"
) -> tuple[float, float]:
    if lam <= 0:
        raise ConfigError("noise scale must be positive")
    if polarity is Polarity.OUT_OF_BAND:
        raise ConfigError("cannot sample the out-of-band region")
    half = lam / 2.0
    if polarity is Polarity.POSITIVE:
        dx, dy = rng.uniform(-half, half, size=2)
        return float(dx), float(dy)
    if band_norm == "per_axis":
        return _negative_axis(rng, lam), _negative_axis(rng, lam)
    while True:
        dx, dy = lam - rng.uniform(0.0, 2.0 * lam, size=2)
        if max(abs(dx), abs(dy)) > half:
            return float(dx), float(dy)


def sample_noise(
    gt: Point,
    polarity: Polarity,
    lam: float,
    rng: np.random.Generator,
    extent: tuple[float, float],
    origin: int = -1,
    band_norm: BandNorm = "chebyshev",
) -> NoisedSample:
    """Perturb a gt coordinate inside the requested band and anchor it for a decoder."""
    dx, dy = draw_offset(polarity, lam, rng, band_norm)
    normed = np.array([(gt[0] + dx) / extent[0], (gt[1] + dy) / extent[1]])
    ax, ay = inverse_sigmoid(normed)
    return NoisedSample(
        origin=origin, offset=(dx, dy), polarity=polarity, anchor=(float(ax), float(ay))
    )


def sample_group(
    nodes: dict[int, Point],
    lam: float,
    rng: np.random.Generator,
    extent: tuple[float, float],
    band_norm: BandNorm = "chebyshev",
) -> list[NoisedSample]:
    """One positive and one negative sample per gt node, ascending id."""
    out: list[NoisedSample] = []
    for node_id in sorted(nodes):
        for polarity in (Polarity.POSITIVE, Polarity.NEGATIVE):
            out.append(
                sample_noise(nodes[node_id], polarity, lam, rng, extent, node_id, band_norm)
            )
    return out
