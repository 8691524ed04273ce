from __future__ import annotations

import argparse
from pathlib import Path

from ...core.config import PipelineConfig
from ...core.errors import ConfigError
from ...domain.completion import CompletionConfig
from ...repositories.graph_files import load_graph
from ...repositories.ports import NodeProposer
from ...services.connect_net import ConnectConfig
from ...services.proposers import HeuristicProposer, OracleProposer


def require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"missing {what} file: {path}")
    return path


def connect_config(cfg: PipelineConfig) -> ConnectConfig:
    return ConnectConfig(
        n_bins=cfg.n_bins,
        pair_mode=cfg.pair_mode,
        width=cfg.feature_width,
        heads=cfg.heads,
        range_r=cfg.range_r,
        n_pt=cfg.n_pt,
        feature_frame=cfg.feature_frame,
    )


def completion_config(cfg: PipelineConfig, max_steps: int | None = None) -> CompletionConfig:
    return CompletionConfig(
        max_steps=max_steps if max_steps is not None else cfg.max_steps,
        snap_tol=cfg.snap_tol,
        proposal_threshold=cfg.proposal_threshold,
        continue_on_branch=cfg.continue_on_branch,
        max_pushed=cfg.max_pushed,
        seed=cfg.seed,
    )


def add_proposer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--proposer", choices=("oracle", "heuristic"), default="oracle")
    parser.add_argument("--gt", type=Path, help="ground truth graph (oracle proposer)")
    parser.add_argument("--sigma", type=float, default=0.0, help="oracle noise in px")


def make_proposer(args: argparse.Namespace, cfg: PipelineConfig) -> NodeProposer:
    if args.proposer == "heuristic":
        return HeuristicProposer(stride=cfg.stride, threshold=cfg.proposal_threshold)
    if args.gt is None:
        raise ConfigError("the oracle proposer needs --gt")
    if args.sigma < 0:
        raise ConfigError("--sigma must be non-negative")
    gt = load_graph(require_file(args.gt, "ground truth"))
    return OracleProposer(gt, sigma=args.sigma, stride=cfg.stride, seed=cfg.seed)
