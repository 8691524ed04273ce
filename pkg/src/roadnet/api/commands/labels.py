from __future__ import annotations

import argparse
from pathlib import Path

from ...core.config import PipelineConfig
from ...core.logging import get_logger
from ...repositories.artifact_files import load_descriptors, save_labels
from ...repositories.graph_files import load_graph
from ...services.label_gen import generate_labels
from .common import require_file

log = get_logger(__name__)


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("labels", parents=parents, help="connection labels for training")
    p.add_argument("--nodes", type=Path, required=True, help="predicted node descriptors")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    descriptors, _ = load_descriptors(require_file(args.nodes, "nodes"))
    gt = load_graph(require_file(args.gt, "ground truth"))
    labels = generate_labels(
        {i: d.coord for i, d in descriptors.items()}, gt, cfg.range_r, cfg.n_pt
    )
    save_labels(labels, args.out)
    log.info(
        "labels_written",
        valid=len(labels.valid_nodes),
        discarded=len(descriptors) - len(labels.valid_nodes),
        pairs=len(labels.pairs),
    )
    return 0
