from __future__ import annotations

import argparse
from pathlib import Path

from ...core.config import PipelineConfig
from ...repositories.artifact_files import save_report
from ...repositories.graph_files import load_graph
from ...services.evaluation import evaluate, format_table
from .common import require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("evaluate", parents=parents, help="TOPO and APLS against gt")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, help="report JSON (first prediction) or directory")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    gt = load_graph(require_file(args.gt, "ground truth"))
    rows = {}
    for path in args.pred:
        pred = load_graph(require_file(path, "prediction"))
        rows[path.stem] = evaluate(gt, pred, cfg)
    if args.out is not None:
        if len(rows) == 1:
            save_report(next(iter(rows.values())), args.out)
        else:
            for name, report in rows.items():
                save_report(report, args.out / f"{name}.json")
    print(format_table(rows))
    return 0
