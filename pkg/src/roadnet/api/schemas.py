from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, RootModel


class NodeIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    x: float
    y: float


class GraphFile(BaseModel):
    """Edge-list graph: ``{"extent": [w, h], "nodes": [...], "edges": [[a, b], ...]}``."""

    model_config = ConfigDict(extra="forbid")

    extent: tuple[float, float]
    nodes: list[NodeIn] = Field(default_factory=list)
    edges: list[tuple[int, int]] = Field(default_factory=list)


class AdjacencyFile(RootModel[dict[str, list[tuple[float, float]]]]):
    """Dataset-style adjacency keyed by ``"x,y"`` coordinate strings."""


class DescriptorIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    x: float
    y: float
    bins: list[float] = Field(min_length=1)


class DescriptorFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    extent: tuple[float, float]
    nodes: list[DescriptorIn] = Field(default_factory=list)


class LayerIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: list[int]
    values: list[float]


class ConnectConfigIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_bins: int = 36
    pair_mode: Literal["concat", "sum"] = "concat"
    width: int = 64
    heads: int = 4
    layers: int = 3
    feature_frame: Literal["canvas", "local"] = "canvas"
    range_r: float = 50.0
    n_pt: int = 8


class WeightsManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    config: ConnectConfigIn
    layers: dict[str, LayerIn]


class LabelLine(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v: int
    n: int
    label: Literal[0, 1]


class TraceLine(BaseModel):
    step: int
    center: tuple[float, float]
    proposed: list[tuple[float, float, float]]
    action: Literal["bridge", "extend", "branch", "stop"]
    added_nodes: list[int] = Field(default_factory=list)
    added_edges: list[tuple[int, int]] = Field(default_factory=list)


class LossCurveOut(BaseModel):
    epochs: int
    lr: float
    loss: list[float]
    accuracy: float


class MetricReportOut(BaseModel):
    topo_p: float
    topo_r: float
    topo_f1: float
    apls: float
    apls_gt_to_pred: float
    apls_pred_to_gt: float
    per_seed: list[dict[str, Any]] = Field(default_factory=list)
    per_pair: list[dict[str, Any]] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)
