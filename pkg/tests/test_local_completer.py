from __future__ import annotations

import math
import time
from collections.abc import Callable, Sequence

import networkx as nx
import numpy as np
import pytest

from roadnet.core.errors import (
    ConfigError,
    ContractViolationError,
    EmptyBatchError,
    OutOfExtentError,
)
from roadnet.domain.completion import (
    PATCH_SIZE,
    CompletionConfig,
    ProposedNode,
    ProposerPatch,
    StepAction,
)
from roadnet.domain.graph import RoadGraph, graph_from_edges
from roadnet.domain.metrics import AplsConfig
from roadnet.domain.scene import Fragmentation
from roadnet.services.apls import apls
from roadnet.services.local_completer import (
    build_query_centers,
    check_contract,
    complete,
    crop_patch,
    evaluate_proposer,
    extract_local_samples,
    patch_origin,
)
from roadnet.services.proposers import HeuristicProposer, OracleProposer
from roadnet.services.road_graph import rasterize
from roadnet.services.synth import fragment

EXTENT = (128.0, 128.0)
BLANK = np.zeros((1, 128, 128))
LINE_GT = graph_from_edges([(10, 64), (118, 64)], [(0, 1)], EXTENT)


class Scripted:
    """Answers with whatever ``rule`` returns for the patch center."""

    def __init__(self, rule: Callable[[ProposerPatch], Sequence[ProposedNode]]) -> None:
        self.rule = rule
        self.calls = 0

    def propose(self, patch: ProposerPatch) -> list[ProposedNode]:
        self.calls += 1
        return list(self.rule(patch))


def gap_line(a: float, b: float) -> RoadGraph:
    return graph_from_edges([(10, 64), (a, 64), (b, 64), (118, 64)], [(0, 1), (2, 3)], EXTENT)


def is_superset(big: RoadGraph, small: RoadGraph) -> bool:
    return all(big.position(n.id) == n.xy for n in small.nodes) and small.edges <= big.edges


def bridged(g: RoadGraph, frag: Fragmentation) -> list[bool]:
    graph = g.to_networkx()
    return [nx.has_path(graph, *gap.endpoint_ids) for gap in frag.gaps]


class TestCrop:
    """Test patch cropping"""

    def test_origin_rounds_center(self) -> None:
        assert patch_origin((64.0, 64.0)) == (0, 0)
        assert patch_origin((64.5, 10.2)) == (1, -54)

    def test_corner_is_zero_padded(self) -> None:
        image = np.arange(2 * 100 * 120, dtype=np.float64).reshape(2, 100, 120) + 1.0
        raster = np.ones((100, 120), dtype=bool)
        patch = crop_patch(image, raster, (5.0, 5.0))
        assert patch.origin == (-59, -59)
        assert patch.image.shape == (2, PATCH_SIZE, PATCH_SIZE)
        np.testing.assert_array_equal(patch.image[:, 64, 64], image[:, 5, 5])
        assert not patch.image[:, :59, :].any()
        assert not patch.raster[:, :, :59].any()
        assert patch.raster.sum() == 69 * 69

    def test_mid_canvas_is_a_plain_window(self, square: RoadGraph) -> None:
        image = np.random.default_rng(0).random((1, 256, 256))
        raster = rasterize(square, 2.0, (256.0, 256.0))
        patch = crop_patch(image, raster, (128.0, 128.0))
        np.testing.assert_array_equal(patch.image, image[:, 64:192, 64:192])
        assert patch.raster.sum() == raster.bits[64:192, 64:192].sum()
        assert patch.local_center == (64.0, 64.0)

    def test_center_outside_canvas(self) -> None:
        with pytest.raises(OutOfExtentError):
            crop_patch(BLANK, np.zeros((128, 128), dtype=bool), (-1.0, 5.0))

    def test_image_raster_mismatch(self) -> None:
        with pytest.raises(OutOfExtentError):
            crop_patch(np.zeros((1, 64, 64)), np.zeros((128, 128), dtype=bool), (5.0, 5.0))


class TestContract:
    """Test proposer contract checks"""

    @pytest.mark.parametrize(
        "nodes",
        [
            [ProposedNode(1.0, 1.0, 0.9)] * 5,
            [ProposedNode(math.nan, 1.0, 0.9)],
            [ProposedNode(128.0, 1.0, 0.9)],
            [ProposedNode(1.0, -0.5, 0.9)],
            [ProposedNode(1.0, 1.0, 1.5)],
        ],
    )
    def test_violations(self, nodes: list[ProposedNode]) -> None:
        with pytest.raises(ContractViolationError):
            check_contract(nodes)

    def test_four_nodes_pass(self) -> None:
        nodes = [ProposedNode(float(i), 127.0, 0.0) for i in range(4)]
        assert check_contract(nodes) == nodes

    def test_complete_surfaces_violation(self, path_graph: RoadGraph) -> None:
        bad = Scripted(lambda _: [ProposedNode(200.0, 0.0, 1.0)])
        with pytest.raises(ContractViolationError):
            complete(path_graph, BLANK, bad)

    def test_max_steps_must_be_positive(self) -> None:
        with pytest.raises(ConfigError):
            CompletionConfig(max_steps=0)


class TestComplete:
    """Test completion loop"""

    def test_silent_proposer_is_identity(self, y_graph: RoadGraph) -> None:
        silent = Scripted(lambda _: [])
        result, trace = complete(y_graph, BLANK, silent)
        assert result == y_graph
        assert trace.proposer_calls == silent.calls == len(build_query_centers(y_graph)) == 3
        assert trace.count(StepAction.STOP) == 3
        assert not trace.added_edges()

    def test_frontier_is_sorted_endpoints(self, path_graph: RoadGraph) -> None:
        assert build_query_centers(path_graph) == [0, 2]

    def test_24px_gap_bridged(self) -> None:
        residual = gap_line(50, 74)
        result, trace = complete(residual, BLANK, OracleProposer(LINE_GT))
        assert nx.has_path(result.to_networkx(), 1, 2)
        (bridge,) = [ev for ev in trace.events if ev.action is StepAction.BRIDGE]
        assert bridge.step <= 5
        assert bridge.added_edges[0][1] == 2
        assert is_superset(result, residual)

    def test_12px_gap_bridged_in_two_steps(self) -> None:
        result, trace = complete(gap_line(50, 62), BLANK, OracleProposer(LINE_GT))
        extend, bridge = [ev for ev in trace.events if ev.action is not StepAction.STOP]
        assert (extend.action, extend.step) == (StepAction.EXTEND, 1)
        assert (bridge.action, bridge.step) == (StepAction.BRIDGE, 2)
        assert result.has_edge(4, 2)
        assert len(result.nodes) == 5

    def test_proposals_stay_within_one_stride(self) -> None:
        result, trace = complete(gap_line(50, 90), BLANK, OracleProposer(LINE_GT, stride=10.0))
        assert nx.has_path(result.to_networkx(), 1, 2)
        reach = [
            math.hypot(x - ev.center[0], y - ev.center[1])
            for ev in trace.events
            for x, y, _ in ev.proposed
        ]
        assert reach
        assert max(reach) <= 10.0 + 1e-9

    def test_over_long_gap_leaves_a_stub(self) -> None:
        residual = graph_from_edges([(10, 64), (20, 64)], [(0, 1)], EXTENT)
        result, trace = complete(residual, BLANK, OracleProposer(LINE_GT))
        assert trace.count(StepAction.EXTEND) == 5
        assert trace.count(StepAction.BRIDGE) == 0
        assert trace.proposer_calls == 6
        assert len(result.nodes) == 7
        assert max(n.x for n in result.nodes) == pytest.approx(70.0)

    def test_low_probability_proposals_stop(self, path_graph: RoadGraph) -> None:
        shy = Scripted(lambda p: [ProposedNode(74.0, 64.0, 0.3)])
        result, trace = complete(path_graph, BLANK, shy)
        assert result == path_graph
        assert trace.count(StepAction.STOP) == 2

    def test_branch_queues_the_other_node(self) -> None:
        g = graph_from_edges([(10, 64), (30, 64)], [(0, 1)], EXTENT)

        def fork(patch: ProposerPatch) -> list[ProposedNode]:
            if patch.center != (30.0, 64.0):
                return []
            cx, cy = patch.local_center
            return [ProposedNode(cx + 10, cy - 10, 0.9), ProposedNode(cx + 10, cy + 10, 0.9)]

        result, trace = complete(g, BLANK, Scripted(fork), CompletionConfig(seed=1))
        assert trace.count(StepAction.BRANCH) == 1
        assert trace.pushed == 1
        assert trace.proposer_calls == 3
        assert result.degree(1) == 3
        assert {result.position(n) for n in result.neighbors(1)} >= {(40.0, 54.0), (40.0, 74.0)}

    def test_termination_bound(self, path_graph: RoadGraph) -> None:
        def spray(patch: ProposerPatch) -> list[ProposedNode]:
            cx, cy = patch.local_center
            return [ProposedNode(cx + 9, cy, 0.9), ProposedNode(cx, min(cy + 9, 127.0), 0.9)]

        cfg = CompletionConfig(max_steps=3, max_pushed=5)
        result, trace = complete(path_graph, BLANK, Scripted(spray), cfg)
        assert trace.pushed <= 5
        assert trace.proposer_calls <= (trace.initial_frontier + trace.pushed) * cfg.max_steps
        assert is_superset(result, path_graph)

    def test_deterministic(
        self, comb_scene: tuple[RoadGraph, np.ndarray], fragmented_comb: Fragmentation
    ) -> None:
        gt, image = comb_scene
        runs = [
            complete(fragmented_comb.residual, image, OracleProposer(gt, sigma=1.0, seed=4))
            for _ in range(2)
        ]
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]


class TestRepair:
    """Test gap repair"""

    def test_fragmented_comb_is_repaired(
        self, comb_scene: tuple[RoadGraph, np.ndarray], fragmented_comb: Fragmentation
    ) -> None:
        gt, image = comb_scene
        residual = fragmented_comb.residual
        start = time.perf_counter()
        result, trace = complete(residual, image, OracleProposer(gt), CompletionConfig(max_steps=5))
        elapsed = time.perf_counter() - start
        assert all(bridged(result, fragmented_comb))
        graph = result.to_networkx()
        for gap in fragmented_comb.gaps:
            length = nx.shortest_path_length(graph, *gap.endpoint_ids, weight="length")
            assert length == pytest.approx(gap.length, abs=1e-6)
        before, *_ = apls(gt, residual, AplsConfig())
        after, *_ = apls(gt, result, AplsConfig())
        assert before < 0.9
        assert after >= 0.99
        assert elapsed < 10.0
        assert trace.count(StepAction.BRIDGE) == 7

    def test_single_step_leaves_long_gaps_open(
        self, comb_scene: tuple[RoadGraph, np.ndarray]
    ) -> None:
        gt, image = comb_scene
        # each end moves at most one stride, so 40 px cannot close
        frag = fragment(gt, 7, 40.0, np.random.default_rng(11))
        short, _ = complete(frag.residual, image, OracleProposer(gt), CompletionConfig(max_steps=1))
        assert not any(bridged(short, frag))
        full, _ = complete(frag.residual, image, OracleProposer(gt), CompletionConfig(max_steps=5))
        assert all(bridged(full, frag))

    def test_single_step_leaves_24px_gap_open(self) -> None:
        cfg = CompletionConfig(max_steps=1)
        once, _ = complete(gap_line(50, 74), BLANK, OracleProposer(LINE_GT), cfg)
        assert not nx.has_path(once.to_networkx(), 1, 2)

    def test_one_sided_gap_needs_two_steps(self) -> None:
        gt = graph_from_edges(
            [(10, 64), (66, 64), (66, 10), (66, 118)], [(0, 1), (1, 2), (1, 3)], EXTENT
        )
        residual = graph_from_edges(
            [(10, 64), (50, 64), (66, 10), (66, 64), (66, 118)],
            [(0, 1), (2, 3), (3, 4)],
            EXTENT,
        )
        once, _ = complete(residual, BLANK, OracleProposer(gt), CompletionConfig(max_steps=1))
        assert not nx.has_path(once.to_networkx(), 1, 3)
        twice, trace = complete(residual, BLANK, OracleProposer(gt), CompletionConfig(max_steps=2))
        assert nx.has_path(twice.to_networkx(), 1, 3)
        (bridge,) = [ev for ev in trace.events if ev.action is StepAction.BRIDGE]
        assert bridge.step == 2

    def test_heuristic_misses_a_sharp_bend(self) -> None:
        gt = graph_from_edges([(10, 64), (52, 64), (52, 118)], [(0, 1), (1, 2)], EXTENT)
        residual = graph_from_edges(
            [(10, 64), (50, 64), (52, 76), (52, 118)], [(0, 1), (2, 3)], EXTENT
        )
        image = np.zeros((1, 128, 128))
        image[0, 63:66, 10:54] = 1.0
        image[0, 63:119, 51:54] = 1.0
        guessed, _ = complete(residual, image, HeuristicProposer())
        assert not nx.has_path(guessed.to_networkx(), 1, 2)
        traced, _ = complete(residual, image, OracleProposer(gt))
        assert nx.has_path(traced.to_networkx(), 1, 2)

    def test_long_noisy_walks_only_grow(
        self, comb_scene: tuple[RoadGraph, np.ndarray], fragmented_comb: Fragmentation
    ) -> None:
        gt, image = comb_scene
        residual = fragmented_comb.residual
        cfg = CompletionConfig(max_steps=20)
        result, trace = complete(residual, image, OracleProposer(gt, sigma=1.5, seed=9), cfg)
        assert is_superset(result, residual)
        assert trace.proposer_calls <= (trace.initial_frontier + trace.pushed) * cfg.max_steps
        half_diagonal = math.hypot(PATCH_SIZE / 2, PATCH_SIZE / 2)
        assert all(result.edge_length(a, b) <= half_diagonal for a, b in trace.added_edges())


class TestProposers:
    """Test reference proposers"""

    def test_oracle_mid_segment_proposes_both_ways(self) -> None:
        patch = crop_patch(BLANK, np.zeros((128, 128), dtype=bool), (64.0, 64.0))
        nodes = OracleProposer(LINE_GT).propose(patch)
        coords = sorted((n.x, n.y) for n in nodes)
        assert [v for xy in coords for v in xy] == pytest.approx([54.0, 64.0, 74.0, 64.0])

    def test_oracle_off_road_is_silent(self) -> None:
        patch = crop_patch(BLANK, np.zeros((128, 128), dtype=bool), (64.0, 80.0))
        assert OracleProposer(LINE_GT).propose(patch) == []

    def test_oracle_noise_is_bounded_on_average(self) -> None:
        raster = rasterize(graph_from_edges([(10, 64), (64, 64)], [(0, 1)], EXTENT), 2.0)
        patch = crop_patch(BLANK, raster, (64.0, 64.0))
        (exact,) = OracleProposer(LINE_GT).propose(patch)
        noisy = OracleProposer(LINE_GT, sigma=1.0, seed=2)
        errors = []
        for _ in range(400):
            (node,) = noisy.propose(patch)
            errors.append(math.hypot(node.x - exact.x, node.y - exact.y))
        assert float(np.mean(errors)) <= 1.5

    def _tail_patch(self, brightness: float) -> ProposerPatch:
        image = np.zeros((1, 128, 128))
        image[0, 60:69, :] = brightness
        raster = np.zeros((1, 128, 128))
        raster[0, 63:66, 54:65] = 1.0
        return ProposerPatch((64.0, 64.0), (0, 0), image, raster)

    def test_heuristic_follows_bright_road(self) -> None:
        (node,) = HeuristicProposer().propose(self._tail_patch(1.0))
        assert (node.x, node.y, node.prob) == pytest.approx((74.0, 64.0, 1.0))

    def test_heuristic_stops_on_dark_ground(self) -> None:
        assert HeuristicProposer().propose(self._tail_patch(0.0)) == []


class TestLocalSamples:
    """Test local-stage samples"""

    def test_oracle_beats_silence(self, comb_scene: tuple[RoadGraph, np.ndarray]) -> None:
        gt, image = comb_scene
        samples = extract_local_samples(gt, image)
        assert samples
        assert all(s.patch.image.shape == (1, PATCH_SIZE, PATCH_SIZE) for s in samples)
        silent = evaluate_proposer(Scripted(lambda _: []), samples)
        assert silent == pytest.approx(5.0)
        assert evaluate_proposer(OracleProposer(gt), samples) < 0.5

    def test_no_samples(self) -> None:
        with pytest.raises(EmptyBatchError):
            evaluate_proposer(OracleProposer(LINE_GT), [])
