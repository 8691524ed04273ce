from __future__ import annotations

import math

import numpy as np
import pytest

from roadnet.core.errors import ConfigError
from roadnet.domain.graph import RoadGraph
from roadnet.domain.scene import Fragmentation, SceneSpec
from roadnet.services.road_graph import endpoints
from roadnet.services.synth import JITTER_CLIP, fragment, generate_graph, generate_scene


class TestSceneSpec:
    """Test scene spec validation"""

    @pytest.mark.parametrize(
        "kwargs",
        [{"extent": (0, 512)}, {"pitch": 0.0}, {"drop_rate": 1.0}, {"jitter": -1.0}],
    )
    def test_rejects_bad_values(self, kwargs: dict[str, object]) -> None:
        with pytest.raises(ConfigError):
            SceneSpec(**kwargs)  # type: ignore[arg-type]


class TestGenerate:
    """Test grid generation and rendering"""

    def test_grid_lattice(self, grid_scene: tuple[RoadGraph, np.ndarray]) -> None:
        gt, image = grid_scene
        assert len(gt.nodes) == 64
        assert len(gt.edges) == 112
        assert image.shape == (1, 512, 512)
        assert 0.0 <= image.min() and image.max() <= 1.0

    def test_comb_is_a_tree(self, comb_scene: tuple[RoadGraph, np.ndarray]) -> None:
        gt, _ = comb_scene
        assert len(gt.nodes) == 16
        assert len(gt.edges) == 15
        assert len(endpoints(gt)) == 8

    def test_roads_are_brighter(self, grid_scene: tuple[RoadGraph, np.ndarray]) -> None:
        _, image = grid_scene
        assert image[0, 32, 32] > 0.8
        assert image[0, 64, 64] < 0.5

    def test_deterministic(self) -> None:
        spec = SceneSpec(seed=21, jitter=2.0, curve_amplitude=6.0, noise_channels=2)
        g1, im1 = generate_scene(spec)
        g2, im2 = generate_scene(spec)
        assert g1 == g2
        assert np.array_equal(im1, im2)
        assert im1.shape == (3, 512, 512)

    def test_jitter_is_bounded(self) -> None:
        spec = SceneSpec(jitter=3.0)
        g = generate_graph(spec, np.random.default_rng(0))
        for n in g.nodes:
            ox = (n.x - 32.0) % 64.0
            oy = (n.y - 32.0) % 64.0
            assert min(ox, 64.0 - ox) <= JITTER_CLIP * 3.0 + 1e-9
            assert min(oy, 64.0 - oy) <= JITTER_CLIP * 3.0 + 1e-9

    def test_drop_rate_removes_edges(self) -> None:
        g = generate_graph(SceneSpec(drop_rate=0.5), np.random.default_rng(1))
        assert 0 < len(g.edges) < 112

    def test_curves_keep_length_at_least_straight(self) -> None:
        straight = generate_graph(SceneSpec(), np.random.default_rng(0))
        curved = generate_graph(SceneSpec(curve_amplitude=8.0), np.random.default_rng(0))
        assert len(curved.nodes) > len(straight.nodes)
        assert curved.total_length() > straight.total_length()


class TestFragment:
    """Test gap cutting"""

    def test_cuts_requested_gaps(self, fragmented_comb: Fragmentation) -> None:
        frag = fragmented_comb
        assert len(frag.gaps) == 7
        assert len(frag.residual.edges) == 15 + 7
        assert len(frag.residual.nodes) == 16 + 14
        for gap in frag.gaps:
            assert math.dist(gap.start, gap.end) == pytest.approx(24.0)
            p, q = gap.endpoint_ids
            assert frag.residual.degree(p) == 1
            assert frag.residual.degree(q) == 1

    def test_original_nodes_untouched(
        self, comb_scene: tuple[RoadGraph, np.ndarray], fragmented_comb: Fragmentation
    ) -> None:
        gt, _ = comb_scene
        for n in gt.nodes:
            assert fragmented_comb.residual.position(n.id) == n.xy
        assert len({g.edge for g in fragmented_comb.gaps}) == 7

    def test_too_many_breaks(self, comb_scene: tuple[RoadGraph, np.ndarray]) -> None:
        with pytest.raises(ConfigError):
            fragment(comb_scene[0], 40, 24.0, np.random.default_rng(0))

    def test_zero_breaks_is_identity(self, comb_scene: tuple[RoadGraph, np.ndarray]) -> None:
        frag = fragment(comb_scene[0], 0, 24.0, np.random.default_rng(0))
        assert frag.residual == comb_scene[0] and frag.gaps == []
