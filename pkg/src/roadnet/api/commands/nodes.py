from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ...core.config import PipelineConfig
from ...core.errors import ConfigError
from ...domain.descriptor import NodeDescriptor
from ...repositories.artifact_files import save_descriptors
from ...repositories.graph_files import load_graph
from ...services.node_codec import DirectionCodec, descriptors_from_graph
from ...services.road_graph import densify
from .common import require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser(
        "nodes", parents=parents, help="node descriptors sampled from a ground-truth graph"
    )
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--step", type=float, default=20.0, help="max spacing between nodes in px")
    p.add_argument("--jitter", type=float, default=0.0, help="coordinate noise sigma in px")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    if args.step <= 0 or args.jitter < 0:
        raise ConfigError("--step must be positive and --jitter non-negative")
    gt = load_graph(require_file(args.gt, "ground truth"))
    dense = densify(gt, args.step)
    descriptors = descriptors_from_graph(dense, DirectionCodec(cfg.n_bins))
    if args.jitter > 0:
        rng = np.random.default_rng(cfg.seed)
        w, h = gt.extent
        moved: dict[int, NodeDescriptor] = {}
        for i in sorted(descriptors):
            d = descriptors[i]
            dx, dy = rng.normal(0.0, args.jitter, size=2)
            x = min(max(d.coord[0] + float(dx), 0.0), w)
            y = min(max(d.coord[1] + float(dy), 0.0), h)
            moved[i] = NodeDescriptor((x, y), d.bins)
        descriptors = moved
    save_descriptors(descriptors, gt.extent, args.out)
    return 0
