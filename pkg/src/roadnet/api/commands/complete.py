from __future__ import annotations

import argparse
from pathlib import Path

from ...core.config import PipelineConfig
from ...repositories.artifact_files import load_image, save_trace
from ...repositories.graph_files import load_graph, save_graph
from ...services.local_completer import complete
from .common import add_proposer_flags, completion_config, make_proposer, require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("complete", parents=parents, help="local stage: repair gaps")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trace", type=Path, help="completion trace (JSON lines)")
    add_proposer_flags(p)
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    graph = load_graph(require_file(args.graph, "graph"))
    image = load_image(require_file(args.image, "image"))
    proposer = make_proposer(args, cfg)
    result, trace = complete(graph, image, proposer, completion_config(cfg))
    save_graph(result, args.out)
    if args.trace is not None:
        save_trace(trace, args.trace)
    return 0
