"""File adapters for everything the pipeline writes besides graphs."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image

from ..api.schemas import (
    ConnectConfigIn,
    DescriptorFile,
    DescriptorIn,
    LabelLine,
    LayerIn,
    LossCurveOut,
    MetricReportOut,
    TraceLine,
    WeightsManifest,
)
from ..core.errors import ConfigError, ParseError, ShapeMismatchError
from ..domain.completion import CompletionTrace
from ..domain.connect import TrainResult
from ..domain.descriptor import NodeDescriptor
from ..domain.labels import ConnectionLabel, ConnectionLabelSet
from ..domain.metrics import MetricReport
from ..services.connect_net import ConnectConfig, ConnectNet
from .graph_files import read_lines, read_model, write_json, write_lines

MANIFEST_VERSION = 1
PNG_CHANNELS = (1, 3, 4)


# weights ------------------------------------------------------------------


def save_weights(net: ConnectNet, path: Path) -> None:
    manifest = WeightsManifest(
        version=MANIFEST_VERSION,
        config=ConnectConfigIn(**asdict(net.config)),
        layers={
            name: LayerIn(shape=list(value.shape), values=value.ravel().tolist())
            for name, value in sorted(net.params.items())
        },
    )
    write_json(path, manifest.model_dump(mode="json"))


def load_weights(path: Path) -> ConnectNet:
    manifest = read_model(path, WeightsManifest)
    config = ConnectConfig(**manifest.config.model_dump())
    params: dict[str, npt.NDArray[np.float64]] = {}
    for name, layer in manifest.layers.items():
        values = np.asarray(layer.values, dtype=np.float64)
        if values.size != int(np.prod(layer.shape)):
            raise ShapeMismatchError(
                f"{name}: {values.size} values do not fill shape {tuple(layer.shape)}"
            )
        params[name] = values.reshape(layer.shape)
    return ConnectNet(config, params)


# labels and traces --------------------------------------------------------


def save_labels(labels: ConnectionLabelSet, path: Path) -> None:
    write_lines(path, [LabelLine(v=p.v, n=p.n, label=p.label) for p in labels.pairs])


def load_labels(path: Path) -> ConnectionLabelSet:
    rows = read_lines(path, LabelLine)
    pairs = [ConnectionLabel(r.v, r.n, r.label) for r in rows]
    valid = sorted({p.v for p in pairs} | {p.n for p in pairs})
    return ConnectionLabelSet(valid_nodes=valid, pairs=pairs)


def save_trace(trace: CompletionTrace, path: Path) -> None:
    write_lines(
        path,
        [
            TraceLine(
                step=ev.step,
                center=ev.center,
                proposed=list(ev.proposed),
                action=ev.action.value,
                added_nodes=list(ev.added_nodes),
                added_edges=list(ev.added_edges),
            )
            for ev in trace.events
        ],
    )


def load_trace(path: Path) -> list[TraceLine]:
    return read_lines(path, TraceLine)


# descriptors --------------------------------------------------------------


def save_descriptors(
    descriptors: Mapping[int, NodeDescriptor], extent: tuple[float, float], path: Path
) -> None:
    doc = DescriptorFile(
        extent=extent,
        nodes=[
            DescriptorIn(id=i, x=d.coord[0], y=d.coord[1], bins=d.bins.tolist())
            for i, d in sorted(descriptors.items())
        ],
    )
    write_json(path, doc.model_dump(mode="json"))


def load_descriptors(path: Path) -> tuple[dict[int, NodeDescriptor], tuple[float, float]]:
    doc = read_model(path, DescriptorFile)
    sizes = {len(n.bins) for n in doc.nodes}
    if len(sizes) > 1:
        raise ShapeMismatchError(f"{path}: nodes carry differing bin counts {sorted(sizes)}")
    out: dict[int, NodeDescriptor] = {}
    for n in doc.nodes:
        if n.id in out:
            raise ParseError(f"{path}: duplicate node id {n.id}")
        out[n.id] = NodeDescriptor((n.x, n.y), np.asarray(n.bins, dtype=np.float64))
    return out, doc.extent


# images -------------------------------------------------------------------


def save_image(image: npt.NDArray[np.float64], path: Path) -> None:
    """(C, H, W) image in [0, 1]; ``.npy`` keeps full precision, ``.png`` 8 bits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".npy":
        np.save(path, np.asarray(image, dtype=np.float64))
        return
    channels = image.shape[0]
    if channels not in PNG_CHANNELS:
        raise ConfigError(f"cannot write {channels}-channel image as PNG; use .npy")
    pixels = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    array = pixels[0] if channels == 1 else np.moveaxis(pixels, 0, -1)
    Image.fromarray(array).save(path, format="PNG")


def load_image(path: Path) -> npt.NDArray[np.float64]:
    try:
        if path.suffix == ".npy":
            image = np.load(path, allow_pickle=False)
        else:
            with Image.open(path) as handle:
                array = np.asarray(handle, dtype=np.float64) / 255.0
            image = array[None] if array.ndim == 2 else np.moveaxis(array, -1, 0)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read image {path}: {exc}") from exc
    if image.ndim != 3:
        raise ShapeMismatchError(f"image {path} must be (C, H, W), got shape {image.shape}")
    return np.asarray(image, dtype=np.float64)


# reports ------------------------------------------------------------------


def save_report(report: MetricReport, path: Path) -> None:
    write_json(path, MetricReportOut.model_validate(report.to_dict()).model_dump(mode="json"))


def save_curve(result: TrainResult, epochs: int, lr: float, path: Path) -> None:
    doc = LossCurveOut(epochs=epochs, lr=lr, loss=result.loss_curve, accuracy=result.accuracy)
    write_json(path, doc.model_dump(mode="json"))
