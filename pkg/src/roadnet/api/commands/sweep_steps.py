from __future__ import annotations

import argparse
import time
from pathlib import Path

from ...core.config import PipelineConfig
from ...core.errors import ConfigError
from ...repositories.artifact_files import load_image
from ...repositories.graph_files import load_graph
from ...services.evaluation import evaluate
from ...services.local_completer import complete
from .common import add_proposer_flags, completion_config, make_proposer, require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser(
        "sweep-steps", parents=parents, help="completion quality against the step cap"
    )
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--steps", type=int, nargs="+", default=[0, 1, 5, 10, 20])
    add_proposer_flags(p)
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    if any(s < 0 for s in args.steps):
        raise ConfigError("--steps values must be non-negative")
    if args.gt is None:
        raise ConfigError("sweep-steps needs --gt to score against")
    graph = load_graph(require_file(args.graph, "graph"))
    image = load_image(require_file(args.image, "image"))
    gt = load_graph(require_file(args.gt, "ground truth"))
    print(f"{'steps':>5}  {'TOPO-F1':>8}  {'APLS':>8}  {'seconds':>8}")
    for steps in args.steps:
        start = time.perf_counter()
        result = graph
        if steps > 0:
            proposer = make_proposer(args, cfg)
            result, _ = complete(graph, image, proposer, completion_config(cfg, steps))
        elapsed = time.perf_counter() - start
        report = evaluate(gt, result, cfg)
        f1, value = 100 * report.topo_f1, 100 * report.apls
        print(f"{steps:>5}  {f1:>8.2f}  {value:>8.2f}  {elapsed:>8.3f}")
    return 0
