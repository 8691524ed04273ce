from __future__ import annotations

import argparse
from pathlib import Path

from ...core.config import PipelineConfig
from ...repositories.artifact_files import load_descriptors, load_weights
from ...repositories.graph_files import save_graph
from ...services.connect_net import check_compatible
from ...services.tiling import extract_tiled
from .common import require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("extract", parents=parents, help="global stage: predict edges")
    p.add_argument("--nodes", type=Path, required=True)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    descriptors, extent = load_descriptors(require_file(args.nodes, "nodes"))
    net = load_weights(require_file(args.weights, "weights"))
    check_compatible(
        net.config, n_bins=cfg.n_bins, pair_mode=cfg.pair_mode, feature_frame=cfg.feature_frame
    )
    graph = extract_tiled(
        net,
        descriptors,
        extent,
        tile=cfg.tile,
        overlap=cfg.overlap,
        threshold=cfg.connect_threshold,
        snap_tol=cfg.snap_tol,
        range_r=cfg.range_r,
        n_pt=cfg.n_pt,
    )
    save_graph(graph, args.out)
    return 0
