from __future__ import annotations

import math
import time

import numpy as np
import pytest

from roadnet.core.errors import (
    ConfigError,
    DivergenceError,
    EmptyBatchError,
    ShapeMismatchError,
)
from roadnet.domain.connect import ConnectBatch, LabeledBatch
from roadnet.domain.descriptor import NodeDescriptor
from roadnet.domain.graph import RoadGraph, graph_from_edges
from roadnet.domain.labels import ConnectionLabel, ConnectionLabelSet, Polarity
from roadnet.domain.scene import SceneSpec
from roadnet.services.connect_net import (
    ConnectConfig,
    ConnectNet,
    Optimizer,
    accuracy,
    build_training_set,
    check_compatible,
    denoising_set,
    make_batch,
    predict_edges,
    train,
)
from roadnet.services.denoise import classify_offset
from roadnet.services.label_gen import generate_labels
from roadnet.services.node_codec import descriptors_from_graph
from roadnet.services.road_graph import densify
from roadnet.services.synth import generate_graph

SMALL = ConnectConfig(n_bins=12, width=8, heads=2, layers=2)


def random_batch(
    rng: np.random.Generator, cfg: ConnectConfig, b: int = 3
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    features = rng.uniform(0.0, 1.0, (b, cfg.n_pt, cfg.input_size))
    mask = rng.random((b, cfg.n_pt)) < 0.7
    mask[:, 0] = True
    labels = (rng.random((b, cfg.n_pt)) < 0.4).astype(np.float64)
    return features, mask, labels


def edge_f1(pred: RoadGraph, gt: RoadGraph) -> float:
    hits = len(pred.edges & gt.edges)
    if not hits:
        return 0.0
    p, r = hits / len(pred.edges), hits / len(gt.edges)
    return 2 * p * r / (p + r)


def scene_dataset(
    seed: int, cfg: ConnectConfig
) -> tuple[RoadGraph, dict[int, NodeDescriptor], list[LabeledBatch]]:
    gt = generate_graph(SceneSpec(jitter=2.0, seed=seed), np.random.default_rng(seed))
    dense = densify(gt, 20.0)
    descriptors = descriptors_from_graph(dense)
    labels = generate_labels(
        {i: d.coord for i, d in descriptors.items()}, dense, cfg.range_r, cfg.n_pt
    )
    return dense, descriptors, build_training_set(descriptors, labels, cfg, dense.extent)


class TestForward:
    """Test forward pass"""

    def test_zero_net_outputs_half(self) -> None:
        net = ConnectNet.zeros(ConnectConfig())
        features, mask, _ = random_batch(np.random.default_rng(0), ConnectConfig())
        out = net.forward(ConnectBatch(features[0], mask[0]))
        assert out.shape == (8, 2)
        assert np.all(out == 0.5)

    def test_outputs_are_probabilities(self) -> None:
        net = ConnectNet.initialize(ConnectConfig(), seed=1)
        features, mask, _ = random_batch(np.random.default_rng(1), ConnectConfig())
        out = net.forward_many(features, mask)
        assert out.shape == (3, 8, 2)
        assert np.all((out > 0.0) & (out < 1.0))

    def test_row_permutation_equivariance(self) -> None:
        net = ConnectNet.initialize(SMALL, seed=2)
        features, mask, _ = random_batch(np.random.default_rng(2), SMALL, b=1)
        perm = np.random.default_rng(3).permutation(SMALL.n_pt)
        out = net.forward_many(features, mask)[0]
        permuted = net.forward_many(features[:, perm], mask[:, perm])[0]
        np.testing.assert_allclose(permuted, out[perm], atol=1e-12)

    def test_padding_rows_do_not_leak(self) -> None:
        net = ConnectNet.initialize(SMALL, seed=4)
        features, mask, _ = random_batch(np.random.default_rng(4), SMALL, b=1)
        mask[0, -1] = False
        noisy = features.copy()
        noisy[0, -1] = 99.0
        a = net.forward_many(features, mask)[0][mask[0]]
        b = net.forward_many(noisy, mask)[0][mask[0]]
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_width_mismatch(self) -> None:
        net = ConnectNet.zeros(SMALL)
        with pytest.raises(ShapeMismatchError):
            net.forward(ConnectBatch(np.zeros((8, 5)), np.ones(8, dtype=bool)))

    def test_rejects_missing_parameters(self) -> None:
        params = ConnectNet.zeros(SMALL).params
        del params["head.b"]
        with pytest.raises(ShapeMismatchError):
            ConnectNet(SMALL, params)

    def test_width_must_split_into_heads(self) -> None:
        with pytest.raises(ConfigError):
            ConnectConfig(width=10, heads=4)


class TestBackward:
    """Test analytic gradients"""

    def test_zero_logits_cost_ln2(self) -> None:
        net = ConnectNet.zeros(SMALL)
        features, mask, labels = random_batch(np.random.default_rng(5), SMALL)
        loss, _ = net.loss_and_grads(features, mask, labels)
        assert loss == pytest.approx(math.log(2.0))

    def test_all_rows_masked(self) -> None:
        net = ConnectNet.zeros(SMALL)
        batch = ConnectBatch(np.zeros((8, SMALL.input_size)), np.zeros(8, dtype=bool))
        with pytest.raises(EmptyBatchError):
            net.backward(batch, np.zeros(8))

    @pytest.mark.parametrize("net_seed", range(5))
    def test_gradients_match_central_differences(self, net_seed: int) -> None:
        cfg = SMALL if net_seed % 2 == 0 else ConnectConfig(12, "sum", width=8, heads=2)
        net = ConnectNet.initialize(cfg, seed=net_seed)
        rng = np.random.default_rng(100 + net_seed)
        for name in net.params:
            net.params[name] += rng.normal(0.0, 0.05, net.params[name].shape)
        h = 1e-5
        worst = 0.0
        for _ in range(5):
            features, mask, labels = random_batch(rng, cfg)
            _, grads = net.loss_and_grads(features, mask, labels)
            for name, value in net.params.items():
                flat = value.reshape(-1)
                picks = rng.choice(flat.size, size=min(12, flat.size), replace=False)
                analytic = grads[name].reshape(-1)[picks]
                numeric = np.empty_like(analytic)
                for j, idx in enumerate(picks):
                    saved = flat[idx]
                    flat[idx] = saved + h
                    up, _ = net.loss_and_grads(features, mask, labels)
                    flat[idx] = saved - h
                    down, _ = net.loss_and_grads(features, mask, labels)
                    flat[idx] = saved
                    numeric[j] = (up - down) / (2.0 * h)
                # absolute floor for tensors whose true gradient vanishes (key biases)
                scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-5)
                worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
        assert worst <= 1e-4


class TestTrain:
    """Test training loop"""

    def separable(self, n: int = 40) -> list[LabeledBatch]:
        rng = np.random.default_rng(6)
        out = []
        for _ in range(n):
            features, mask, _ = random_batch(rng, SMALL, b=1)
            # candidate bin 0 decides the label
            bit = (rng.random(SMALL.n_pt) < 0.5).astype(np.float64)
            features[0, :, SMALL.node_size + 2] = bit
            out.append(LabeledBatch(ConnectBatch(features[0], mask[0]), bit))
        return out

    def test_separable_pairs_are_learned(self) -> None:
        data = self.separable()
        net = ConnectNet.initialize(SMALL, seed=0)
        net, result = train(net, data, 200, lr=1e-2, batch_size=8, optimizer="adamw")
        assert result.accuracy >= 0.99
        assert accuracy(net, data) == result.accuracy

    def test_loss_never_worse_than_start(self) -> None:
        data = self.separable()
        features = np.stack([d.batch.features for d in data])
        mask = np.stack([d.batch.mask for d in data])
        labels = np.stack([d.labels for d in data])
        net = ConnectNet.initialize(SMALL, seed=0)
        trained, result = train(net, data, 20, lr=1.0)
        start, _ = net.loss_and_grads(features, mask, labels)
        final, _ = trained.loss_and_grads(features, mask, labels)
        assert final <= start
        assert result.loss_curve[0] == pytest.approx(start)
        assert len(result.loss_curve) == 21

    def test_zero_lr_keeps_parameters(self) -> None:
        net = ConnectNet.initialize(SMALL, seed=1)
        trained, _ = train(net, self.separable(8), 3, lr=0.0)
        for name, value in net.params.items():
            assert np.array_equal(trained.params[name], value)

    def test_zero_epochs_is_initialisation(self) -> None:
        net = ConnectNet.initialize(SMALL, seed=1)
        trained, result = train(net, self.separable(8), 0)
        assert all(np.array_equal(trained.params[k], v) for k, v in net.params.items())
        assert len(result.loss_curve) == 1

    @pytest.mark.parametrize("optimizer", ["sgd", "adamw"])
    def test_deterministic(self, optimizer: Optimizer) -> None:
        data = self.separable(12)
        curves = [
            train(ConnectNet.initialize(SMALL, seed=2), data, 5, 0.05, 9, optimizer=optimizer)[1]
            for _ in range(2)
        ]
        assert curves[0].loss_curve == curves[1].loss_curve

    def test_nan_features_diverge_with_epoch(self) -> None:
        bad = LabeledBatch(
            ConnectBatch(np.full((8, SMALL.input_size), np.nan), np.ones(8, dtype=bool)),
            np.zeros(8),
        )
        with pytest.raises(DivergenceError) as info:
            train(ConnectNet.initialize(SMALL), [bad], 3)
        assert info.value.epoch == 1

    def test_empty_dataset(self) -> None:
        with pytest.raises(EmptyBatchError):
            train(ConnectNet.zeros(SMALL), [], 1)

    def test_unknown_optimizer(self) -> None:
        with pytest.raises(ConfigError):
            bogus: Optimizer = "rmsprop"  # type: ignore[assignment]
            train(ConnectNet.zeros(SMALL), self.separable(2), 1, optimizer=bogus)


class TestBatches:
    """Test pair-row batching"""

    def test_local_frame_centres_query(self) -> None:
        descriptors = descriptors_from_graph(
            densify(generate_graph(SceneSpec(), np.random.default_rng(0)), 20.0)
        )
        cfg = ConnectConfig(feature_frame="local")
        batch = make_batch(0, [1], descriptors, cfg, (512.0, 512.0))
        assert batch.features[0, :2].tolist() == [0.5, 0.5]
        assert batch.mask.tolist() == [True] + [False] * 7

    def test_canvas_frame_is_the_default(self, path_graph: RoadGraph) -> None:
        descriptors = descriptors_from_graph(path_graph)
        cfg = ConnectConfig()
        w, h = path_graph.extent
        batch = make_batch(0, [1, 2], descriptors, cfg, path_graph.extent)
        size = cfg.node_size
        for row, n in enumerate([1, 2]):
            centre, cand = descriptors[0], descriptors[n]
            assert batch.features[row, :2].tolist() == [centre.coord[0] / w, centre.coord[1] / h]
            assert batch.features[row, size : size + 2].tolist() == [
                cand.coord[0] / w,
                cand.coord[1] / h,
            ]
            assert np.array_equal(batch.features[row, 2:size], centre.bins)
            assert np.array_equal(batch.features[row, size + 2 :], cand.bins)


class TestDenoisingSet:
    """Test noised training copies"""

    LAM = 10.0
    EXTENT = (128.0, 128.0)

    @pytest.fixture
    def inputs(self) -> tuple[dict[int, NodeDescriptor], ConnectionLabelSet]:
        g = graph_from_edges([(40, 64), (60, 64), (80, 64)], [(0, 1), (1, 2)], self.EXTENT)
        labels = ConnectionLabelSet(
            valid_nodes=[0, 1, 2],
            pairs=[
                ConnectionLabel(0, 1, 1),
                ConnectionLabel(0, 2, 0),
                ConnectionLabel(1, 0, 1),
                ConnectionLabel(1, 2, 1),
                ConnectionLabel(2, 1, 1),
            ],
        )
        return descriptors_from_graph(g), labels

    def noised(
        self, inputs: tuple[dict[int, NodeDescriptor], ConnectionLabelSet], seed: int = 0
    ) -> tuple[list[LabeledBatch], list[LabeledBatch]]:
        descriptors, labels = inputs
        cfg = ConnectConfig()
        clean = build_training_set(descriptors, labels, cfg, self.EXTENT)
        rng = np.random.default_rng(seed)
        return clean, denoising_set(descriptors, labels, cfg, self.EXTENT, self.LAM, rng)

    def test_one_copy_per_band(
        self, inputs: tuple[dict[int, NodeDescriptor], ConnectionLabelSet]
    ) -> None:
        clean, noised = self.noised(inputs)
        assert len(clean) == 3
        assert len(noised) == 2 * len(clean)
        assert [b.batch.center for b in noised] == [0, 0, 1, 1, 2, 2]

    def test_negative_band_is_unconnected(
        self, inputs: tuple[dict[int, NodeDescriptor], ConnectionLabelSet]
    ) -> None:
        clean, noised = self.noised(inputs)
        for k, item in enumerate(clean):
            assert np.array_equal(noised[2 * k].labels, item.labels)
            assert not noised[2 * k + 1].labels.any()
            assert noised[2 * k].batch.candidates == item.batch.candidates

    def test_centre_offsets_fall_in_their_band(
        self, inputs: tuple[dict[int, NodeDescriptor], ConnectionLabelSet]
    ) -> None:
        descriptors, _ = inputs
        w, h = self.EXTENT
        size = ConnectConfig().node_size
        for seed in range(20):
            clean, noised = self.noised(inputs, seed)
            for i, item in enumerate(noised):
                cx, cy = descriptors[item.batch.center].coord
                x, y = item.batch.features[0, :2]
                offset = (float(x * w - cx), float(y * h - cy))
                expected = Polarity.POSITIVE if i % 2 == 0 else Polarity.NEGATIVE
                assert classify_offset(offset, self.LAM) is expected
                # candidate halves of every row are untouched
                reference = clean[i // 2].batch.features
                assert np.array_equal(item.batch.features[:, size:], reference[:, size:])

    def test_fixed_seed_repeats(
        self, inputs: tuple[dict[int, NodeDescriptor], ConnectionLabelSet]
    ) -> None:
        _, a = self.noised(inputs, 7)
        _, b = self.noised(inputs, 7)
        assert all(np.array_equal(x.batch.features, y.batch.features) for x, y in zip(a, b))


class TestLearnability:
    """Test held-out scenes with the local frame"""

    def test_held_out_accuracy_and_edge_f1(self) -> None:
        cfg = ConnectConfig(feature_frame="local")
        start = time.perf_counter()
        _, _, train_set = scene_dataset(3, cfg)
        dense, descriptors, test_set = scene_dataset(4, cfg)
        net, _ = train(
            ConnectNet.initialize(cfg, seed=0),
            train_set,
            120,
            lr=3e-3,
            batch_size=16,
            optimizer="adamw",
        )
        assert accuracy(net, test_set) >= 0.95
        predicted = predict_edges(net, descriptors, dense.extent)
        assert edge_f1(predicted, dense) >= 0.95
        assert time.perf_counter() - start < 60.0

    def test_empty_input_gives_empty_graph(self) -> None:
        g = predict_edges(ConnectNet.zeros(SMALL), [], (64.0, 64.0))
        assert not g.nodes and not g.edges

    def test_high_threshold_on_untrained_net(self, path_graph: RoadGraph) -> None:
        descriptors = descriptors_from_graph(path_graph)
        net = ConnectNet.zeros(ConnectConfig())
        g = predict_edges(net, descriptors, path_graph.extent, 0.999)
        assert not g.edges


class TestCompatibility:
    """Test weights against requested settings"""

    def test_stored_values_pass(self, path_graph: RoadGraph) -> None:
        net = ConnectNet.zeros(ConnectConfig())
        descriptors = descriptors_from_graph(path_graph)
        g = predict_edges(net, descriptors, path_graph.extent, range_r=50.0, n_pt=8)
        assert g.node_ids == path_graph.node_ids

    def test_slot_count_mismatch(self) -> None:
        net = ConnectNet.zeros(ConnectConfig())
        with pytest.raises(ShapeMismatchError, match="n_pt=8"):
            predict_edges(net, [], (64.0, 64.0), n_pt=1)

    def test_range_mismatch(self) -> None:
        net = ConnectNet.zeros(ConnectConfig())
        with pytest.raises(ShapeMismatchError, match="range_r=50.0"):
            predict_edges(net, [], (64.0, 64.0), range_r=5.0)

    def test_unchecked_when_absent(self) -> None:
        check_compatible(SMALL, n_pt=None, feature_frame="canvas", n_bins=12)
        with pytest.raises(ShapeMismatchError):
            check_compatible(SMALL, feature_frame="local")
