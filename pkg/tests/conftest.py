from __future__ import annotations

import os

import numpy as np
import pytest

from roadnet.domain.graph import RoadGraph, graph_from_edges
from roadnet.domain.scene import SceneSpec
from roadnet.services.synth import fragment, generate_scene

# keep test output quiet before any settings are read
os.environ.setdefault("ROADNET_LOG_LEVEL", "WARNING")
os.environ.setdefault("ROADNET_ENABLE_METRICS", "false")

EXTENT = (128.0, 128.0)


@pytest.fixture
def path_graph() -> RoadGraph:
    return graph_from_edges([(10, 10), (40, 10), (70, 10)], [(0, 1), (1, 2)], EXTENT)


@pytest.fixture
def square() -> RoadGraph:
    return graph_from_edges(
        [(20, 20), (80, 20), (80, 80), (20, 80)], [(0, 1), (1, 2), (2, 3), (3, 0)], EXTENT
    )


@pytest.fixture
def y_graph() -> RoadGraph:
    """Junction at (64, 64) with three 50-px arms."""
    return graph_from_edges(
        [(64, 64), (64, 14), (20.7, 89), (107.3, 89)], [(0, 1), (0, 2), (0, 3)], EXTENT
    )


def random_graph(rng: np.random.Generator, n: int, extent: float = 128.0) -> RoadGraph:
    """Connected random tree plus a few chords on distinct random points."""
    points = rng.uniform(5.0, extent - 5.0, size=(n, 2))
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(n // 3):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
    return graph_from_edges([tuple(p) for p in points], sorted(edges), (extent, extent))


@pytest.fixture(scope="session")
def comb_scene() -> tuple[RoadGraph, np.ndarray]:
    return generate_scene(SceneSpec(layout="comb", seed=7))


@pytest.fixture(scope="session")
def grid_scene() -> tuple[RoadGraph, np.ndarray]:
    return generate_scene(SceneSpec(seed=3))


@pytest.fixture(scope="session")
def fragmented_comb(comb_scene: tuple[RoadGraph, np.ndarray]):  # type: ignore[no-untyped-def]
    gt, _ = comb_scene
    return fragment(gt, 7, 24.0, np.random.default_rng(11))
