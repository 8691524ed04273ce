from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from ..core.config import BandNorm, FeatureFrame, PairMode
from ..core.errors import ConfigError, DivergenceError, EmptyBatchError, ShapeMismatchError
from ..core.logging import get_logger
from ..core.observability import stage
from ..domain.connect import ConnectBatch, LabeledBatch, TrainResult
from ..domain.descriptor import DEFAULT_BINS, NodeDescriptor
from ..domain.graph import GraphBuilder, RoadGraph
from ..domain.labels import ConnectionLabelSet, Polarity
from .attention import (
    Array,
    AttentionCache,
    Params,
    attention_backward,
    attention_forward,
    init_attention,
)
from .denoise import sample_group
from .label_gen import candidate_pairs
from .losses import bce_with_logits
from .node_codec import DirectionCodec

log = get_logger(__name__)

Optimizer = Literal["sgd", "adamw"]

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(slots=True, frozen=True)
class ConnectConfig:
    """Architecture of the connection classifier.

    Coordinates are normalised by the full canvas extent. The opt-in
    ``feature_frame="local"`` instead normalises every pair row inside a
    square window of side ``2 * range_r`` centred on the query node.
    """

    n_bins: int = DEFAULT_BINS
    pair_mode: PairMode = "concat"
    width: int = 64
    heads: int = 4
    layers: int = 3
    feature_frame: FeatureFrame = "canvas"
    range_r: float = 50.0
    n_pt: int = 8

    def __post_init__(self) -> None:
        if self.width % self.heads:
            raise ConfigError(f"width {self.width} is not divisible by {self.heads} heads")
        if self.layers < 0 or self.n_pt < 1 or self.range_r <= 0:
            raise ConfigError("layers, n_pt and range_r must be positive")

    @property
    def node_size(self) -> int:
        return 2 + self.n_bins

    @property
    def input_size(self) -> int:
        return 2 * self.node_size if self.pair_mode == "concat" else self.node_size


@dataclass(slots=True)
class _ForwardCache:
    x: Array
    z1: Array
    a1: Array
    h: Array
    attn: list[AttentionCache]


def _sigmoid(z: Array) -> Array:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class ConnectNet:
    """Projection, stacked residual self-attention and a two-channel sigmoid head.

    Channel 1 of the output is the probability that the pair is connected.
    """

    def __init__(self, config: ConnectConfig, params: Params) -> None:
        self.config = config
        expected = self.expected_shapes(config)
        missing = sorted(set(expected) - set(params))
        if missing:
            raise ShapeMismatchError(f"missing parameters: {', '.join(missing)}")
        for name, shape in expected.items():
            value = np.asarray(params[name], dtype=np.float64)
            if value.shape != shape:
                raise ShapeMismatchError(f"{name}: expected shape {shape}, got {value.shape}")
            if not np.all(np.isfinite(value)):
                raise ShapeMismatchError(f"{name}: non-finite parameters")
        self.params: Params = {k: np.array(params[k], dtype=np.float64) for k in expected}

    @staticmethod
    def expected_shapes(config: ConnectConfig) -> dict[str, tuple[int, ...]]:
        d_in, hidden, width = config.input_size, config.node_size, config.width
        shapes: dict[str, tuple[int, ...]] = {
            "proj1.W": (d_in, hidden),
            "proj1.b": (hidden,),
            "proj2.W": (hidden, width),
            "proj2.b": (width,),
        }
        for i in range(config.layers):
            for name in ("q", "k", "v", "o"):
                shapes[f"attn{i}.W{name}"] = (width, width)
                shapes[f"attn{i}.b{name}"] = (width,)
        shapes["head.W"] = (width, 2)
        shapes["head.b"] = (2,)
        return shapes

    @classmethod
    def initialize(cls, config: ConnectConfig, seed: int | np.random.Generator = 0) -> ConnectNet:
        rng = np.random.default_rng(seed)
        d_in, hidden, width = config.input_size, config.node_size, config.width
        params: Params = {
            "proj1.W": rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, hidden)),
            "proj1.b": np.zeros(hidden),
            "proj2.W": rng.normal(0.0, np.sqrt(2.0 / (hidden + width)), size=(hidden, width)),
            "proj2.b": np.zeros(width),
        }
        for i in range(config.layers):
            params.update(init_attention(rng, f"attn{i}", width))
        params["head.W"] = rng.normal(0.0, np.sqrt(2.0 / (width + 2)), size=(width, 2))
        params["head.b"] = np.zeros(2)
        return cls(config, params)

    @classmethod
    def zeros(cls, config: ConnectConfig) -> ConnectNet:
        return cls(config, {k: np.zeros(s) for k, s in cls.expected_shapes(config).items()})

    def copy(self) -> ConnectNet:
        return ConnectNet(self.config, self.params)

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    # forward / backward -------------------------------------------------

    def _check_width(self, features: Array) -> None:
        if features.shape[-1] != self.config.input_size:
            raise ShapeMismatchError(
                f"feature width {features.shape[-1]} != expected {self.config.input_size}"
            )

    def _logits(
        self, features: Array, mask: npt.NDArray[np.bool_]
    ) -> tuple[Array, _ForwardCache]:
        p, cfg = self.params, self.config
        # a batch with no real rows still needs one attendable key
        key_mask = np.where(mask.any(axis=1, keepdims=True), mask, True)
        z1 = features @ p["proj1.W"] + p["proj1.b"]
        a1 = np.maximum(z1, 0.0)
        h = a1 @ p["proj2.W"] + p["proj2.b"]
        caches = []
        for i in range(cfg.layers):
            h, cache = attention_forward(h, p, f"attn{i}", key_mask, cfg.heads)
            caches.append(cache)
        logits = h @ p["head.W"] + p["head.b"]
        return logits, _ForwardCache(features, z1, a1, h, caches)

    def forward_many(self, features: Array, mask: npt.NDArray[np.bool_]) -> Array:
        """Probabilities for a stacked (B, N, d) batch."""
        self._check_width(features)
        logits, _ = self._logits(features, mask)
        return _sigmoid(logits)

    def forward(self, batch: ConnectBatch) -> Array:
        if batch.rows > self.config.n_pt:
            raise ShapeMismatchError(f"row count {batch.rows} exceeds n_pt {self.config.n_pt}")
        return self.forward_many(batch.features[None], batch.mask[None])[0]

    def loss_and_grads(
        self, features: Array, mask: npt.NDArray[np.bool_], labels: Array
    ) -> tuple[float, Params]:
        """Mean two-channel BCE over unmasked rows and exact parameter gradients."""
        self._check_width(features)
        n_valid = int(mask.sum())
        if n_valid == 0:
            raise EmptyBatchError()
        p, cfg = self.params, self.config
        logits, cache = self._logits(features, mask)
        target = np.stack([1.0 - labels, labels], axis=-1)
        loss, grad_valid = bce_with_logits(logits[mask], target[mask])
        grad_logits = np.zeros_like(logits)
        grad_logits[mask] = grad_valid

        grads: Params = {}
        h = cache.h
        grads["head.W"] = h.reshape(-1, h.shape[-1]).T @ grad_logits.reshape(-1, 2)
        grads["head.b"] = grad_logits.reshape(-1, 2).sum(axis=0)
        grad_h = grad_logits @ p["head.W"].T
        for i in reversed(range(cfg.layers)):
            grad_h, layer_grads = attention_backward(
                grad_h, cache.attn[i], p, f"attn{i}", cfg.heads
            )
            grads.update(layer_grads)
        a1, z1, x = cache.a1, cache.z1, cache.x
        flat_grad_h = grad_h.reshape(-1, grad_h.shape[-1])
        grads["proj2.W"] = a1.reshape(-1, a1.shape[-1]).T @ flat_grad_h
        grads["proj2.b"] = flat_grad_h.sum(axis=0)
        grad_z1 = (grad_h @ p["proj2.W"].T) * (z1 > 0.0)
        flat_grad_z1 = grad_z1.reshape(-1, grad_z1.shape[-1])
        grads["proj1.W"] = x.reshape(-1, x.shape[-1]).T @ flat_grad_z1
        grads["proj1.b"] = flat_grad_z1.sum(axis=0)
        return loss, grads

    def backward(self, batch: ConnectBatch, labels: npt.ArrayLike) -> tuple[Params, float]:
        y = np.asarray(labels, dtype=np.float64)
        if y.shape != (batch.rows,):
            raise ShapeMismatchError(f"labels length {y.shape} != rows {batch.rows}")
        loss, grads = self.loss_and_grads(batch.features[None], batch.mask[None], y[None])
        return grads, loss


# batching -----------------------------------------------------------------


def make_batch(
    center: int,
    candidates: Sequence[int],
    descriptors: Mapping[int, NodeDescriptor],
    config: ConnectConfig,
    extent: tuple[float, float],
) -> ConnectBatch:
    """Pair rows of ``center`` against up to ``n_pt`` candidates, zero padded."""
    codec = DirectionCodec(config.n_bins)
    cands = list(candidates)[: config.n_pt]
    c = descriptors[center]
    if config.feature_frame == "local":
        r = config.range_r
        frame = (2.0 * r, 2.0 * r)
        ox, oy = c.coord[0] - r, c.coord[1] - r

        def feat(d: NodeDescriptor) -> Array:
            x = min(max(d.coord[0] - ox, 0.0), frame[0])
            y = min(max(d.coord[1] - oy, 0.0), frame[1])
            return codec.feature(NodeDescriptor((x, y), d.bins), frame)

    else:

        def feat(d: NodeDescriptor) -> Array:
            return codec.feature(d, extent)

    features = np.zeros((config.n_pt, config.input_size))
    mask = np.zeros(config.n_pt, dtype=bool)
    fc = feat(c)
    for row, n in enumerate(cands):
        fn = feat(descriptors[n])
        features[row] = np.concatenate([fc, fn]) if config.pair_mode == "concat" else fc + fn
        mask[row] = True
    return ConnectBatch(features=features, mask=mask, center=center, candidates=tuple(cands))


def build_batches(
    descriptors: Mapping[int, NodeDescriptor], config: ConnectConfig, extent: tuple[float, float]
) -> list[ConnectBatch]:
    coords = {i: d.coord for i, d in descriptors.items()}
    return [
        make_batch(v, cands, descriptors, config, extent)
        for v, cands in candidate_pairs(coords, config.range_r, config.n_pt)
        if cands
    ]


def build_training_set(
    descriptors: Mapping[int, NodeDescriptor],
    labels: ConnectionLabelSet,
    config: ConnectConfig,
    extent: tuple[float, float],
) -> list[LabeledBatch]:
    """One labelled batch per centre, candidates ordered by distance then id."""
    grouped = _group_labels(descriptors, labels)
    out: list[LabeledBatch] = []
    for v in sorted(grouped):
        ranked = _ranked(v, grouped[v], descriptors, config.n_pt)
        batch = make_batch(v, ranked, descriptors, config, extent)
        y = np.zeros(config.n_pt)
        y[: len(ranked)] = [grouped[v][n] for n in ranked]
        out.append(LabeledBatch(batch=batch, labels=y))
    return out


def denoising_set(
    descriptors: Mapping[int, NodeDescriptor],
    labels: ConnectionLabelSet,
    config: ConnectConfig,
    extent: tuple[float, float],
    lam: float,
    rng: np.random.Generator,
    band_norm: BandNorm = "chebyshev",
) -> list[LabeledBatch]:
    """Noised copies of every labelled centre, one per band, ascending centre id.

    A centre moved inside the positive band keeps its labels; one moved into
    the negative band is labelled unconnected to every candidate. Moved
    coordinates are clamped to the canvas.
    """
    grouped = _group_labels(descriptors, labels)
    centres = {v: descriptors[v].coord for v in grouped}
    out: list[LabeledBatch] = []
    for sample in sample_group(centres, lam, rng, extent, band_norm):
        v = sample.origin
        ranked = _ranked(v, grouped[v], descriptors, config.n_pt)
        (cx, cy), (dx, dy) = centres[v], sample.offset
        moved = (min(max(cx + dx, 0.0), extent[0]), min(max(cy + dy, 0.0), extent[1]))
        local = {n: descriptors[n] for n in ranked}
        local[v] = NodeDescriptor(moved, descriptors[v].bins)
        batch = make_batch(v, ranked, local, config, extent)
        y = np.zeros(config.n_pt)
        if sample.polarity is Polarity.POSITIVE:
            y[: len(ranked)] = [grouped[v][n] for n in ranked]
        out.append(LabeledBatch(batch=batch, labels=y))
    log.debug("denoising_set", centres=len(centres), samples=len(out), lam=lam)
    return out


def _group_labels(
    descriptors: Mapping[int, NodeDescriptor], labels: ConnectionLabelSet
) -> dict[int, dict[int, int]]:
    grouped: dict[int, dict[int, int]] = defaultdict(dict)
    for pair in labels.pairs:
        if pair.v in descriptors and pair.n in descriptors:
            grouped[pair.v][pair.n] = pair.label
    return grouped


def _ranked(
    v: int, candidates: Iterable[int], descriptors: Mapping[int, NodeDescriptor], n_pt: int
) -> list[int]:
    cx, cy = descriptors[v].coord
    return sorted(
        candidates,
        key=lambda n: (
            np.hypot(descriptors[n].coord[0] - cx, descriptors[n].coord[1] - cy),
            n,
        ),
    )[:n_pt]


def _stack(dataset: Sequence[LabeledBatch]) -> tuple[Array, npt.NDArray[np.bool_], Array]:
    rows = max(item.batch.rows for item in dataset)
    width = dataset[0].batch.width
    features = np.zeros((len(dataset), rows, width))
    mask = np.zeros((len(dataset), rows), dtype=bool)
    labels = np.zeros((len(dataset), rows))
    for i, item in enumerate(dataset):
        if item.batch.width != width:
            raise ShapeMismatchError(f"batch {i} has width {item.batch.width}, expected {width}")
        n = item.batch.rows
        features[i, :n] = item.batch.features
        mask[i, :n] = item.batch.mask
        labels[i, :n] = item.labels
    return features, mask, labels


def accuracy(net: ConnectNet, dataset: Sequence[LabeledBatch], threshold: float = 0.5) -> float:
    if not dataset:
        return 0.0
    features, mask, labels = _stack(dataset)
    probs = net.forward_many(features, mask)[..., 1]
    correct = (probs >= threshold) == (labels >= 0.5)
    return float(correct[mask].mean()) if mask.any() else 0.0


# training -----------------------------------------------------------------


class _Sgd:
    def __init__(self, lr: float) -> None:
        self.lr = lr

    def __call__(self, params: Params, grads: Params) -> None:
        for name in sorted(grads):
            params[name] -= self.lr * grads[name]


class _AdamW:
    def __init__(self, lr: float, weight_decay: float) -> None:
        self.lr = lr
        self.weight_decay = weight_decay
        self.t = 0
        self.m: Params = {}
        self.v: Params = {}

    def __call__(self, params: Params, grads: Params) -> None:
        b1, b2 = ADAM_BETAS
        self.t += 1
        for name in sorted(grads):
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            update = m_hat / (np.sqrt(v_hat) + ADAM_EPS) + self.weight_decay * params[name]
            params[name] -= self.lr * update


def train(
    net: ConnectNet,
    dataset: Sequence[LabeledBatch],
    epochs: int,
    lr: float = 1e-2,
    seed: int | np.random.Generator = 0,
    batch_size: int = 32,
    optimizer: Optimizer = "sgd",
    weight_decay: float = 0.0,
) -> tuple[ConnectNet, TrainResult]:
    """Mini-batch gradient descent, fixed-step (``sgd``) or decoupled-decay Adam.

    Returns the lowest-loss parameters seen (initial ones included) so the
    final training loss never exceeds the initial one.
    """
    if not dataset:
        raise EmptyBatchError("empty dataset")
    if epochs < 0 or lr < 0 or weight_decay < 0:
        raise ConfigError("epochs, lr and weight decay must be non-negative")
    if optimizer not in ("sgd", "adamw"):
        raise ConfigError(f"unknown optimizer {optimizer!r}")
    rng = np.random.default_rng(seed)
    features, mask, labels = _stack(dataset)
    usable = np.flatnonzero(mask.any(axis=1))
    if usable.size == 0:
        raise EmptyBatchError()
    features, mask, labels = features[usable], mask[usable], labels[usable]

    work = net.copy()
    step = _AdamW(lr, weight_decay) if optimizer == "adamw" else _Sgd(lr)
    best_loss, _ = work.loss_and_grads(features, mask, labels)
    best = work.copy()
    curve = [best_loss]
    with stage("train_connect"):
        for epoch in range(1, epochs + 1):
            order = rng.permutation(len(features))
            for start in range(0, len(order), batch_size):
                idx = order[start : start + batch_size]
                if not mask[idx].any():
                    continue
                _, grads = work.loss_and_grads(features[idx], mask[idx], labels[idx])
                step(work.params, grads)
            loss, _ = work.loss_and_grads(features, mask, labels)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            curve.append(loss)
            if loss < best_loss:
                best_loss, best = loss, work.copy()
            log.debug("connect_epoch", epoch=epoch, loss=loss)
    acc = accuracy(best, dataset)
    log.info(
        "connect_trained",
        optimizer=optimizer,
        epochs=epochs,
        lr=lr,
        loss=best_loss,
        accuracy=acc,
    )
    return best, TrainResult(loss_curve=curve, accuracy=acc)


# inference ----------------------------------------------------------------


def check_compatible(config: ConnectConfig, **requested: object) -> None:
    """Reject a request that disagrees with the configuration weights were trained with.

    ``None`` values are not checked.
    """
    for name in sorted(requested):
        value, trained = requested[name], getattr(config, name)
        if value is not None and value != trained:
            raise ShapeMismatchError(
                f"weights were trained with {name}={trained!r}, got {value!r}"
            )


def predict_edges(
    net: ConnectNet,
    nodes: Sequence[NodeDescriptor] | Mapping[int, NodeDescriptor],
    extent: tuple[float, float],
    threshold: float = 0.5,
    range_r: float | None = None,
    n_pt: int | None = None,
) -> RoadGraph:
    """Connect every candidate pair whose class-1 probability clears ``threshold``
    in either direction. Node ids are list positions for sequence input.

    ``range_r`` and ``n_pt`` default to the values stored with the weights;
    anything else raises :class:`ShapeMismatchError`.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigError("connect threshold must lie in (0, 1]")
    check_compatible(net.config, range_r=range_r, n_pt=n_pt)
    descriptors = dict(nodes) if isinstance(nodes, Mapping) else dict(enumerate(nodes))
    builder = GraphBuilder(extent)
    for node_id in sorted(descriptors):
        x, y = descriptors[node_id].coord
        builder.add_node(x, y, node_id=node_id)
    batches = build_batches(descriptors, net.config, extent)
    if batches:
        features = np.stack([b.features for b in batches])
        mask = np.stack([b.mask for b in batches])
        probs = net.forward_many(features, mask)[..., 1]
        for b, row in zip(batches, probs):
            for n, p in zip(b.candidates, row):
                if p >= threshold:
                    builder.add_edge(b.center, n)
    return builder.build()
