from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ...core.config import PipelineConfig
from ...core.errors import EmptyBatchError
from ...repositories.artifact_files import (
    load_descriptors,
    load_labels,
    save_curve,
    save_weights,
)
from ...services.connect_net import ConnectNet, build_training_set, denoising_set, train
from .common import connect_config, require_file


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("train-connect", parents=parents, help="train the connect network")
    p.add_argument("--nodes", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--optimizer", choices=("sgd", "adamw"), default="sgd")
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument(
        "--denoise", action="store_true", help="add noised copies of every labelled centre"
    )
    p.add_argument("--out", type=Path, required=True, help="weights manifest")
    p.add_argument("--curve", type=Path, help="loss curve JSON")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    descriptors, extent = load_descriptors(require_file(args.nodes, "nodes"))
    labels = load_labels(require_file(args.labels, "labels"))
    config = connect_config(cfg)
    dataset = build_training_set(descriptors, labels, config, extent)
    if not dataset:
        raise EmptyBatchError("no labelled pairs match the given nodes")
    if args.denoise:
        rng = np.random.default_rng(cfg.seed)
        dataset += denoising_set(
            descriptors, labels, config, extent, cfg.noise_lambda, rng, cfg.band_norm
        )
    net = ConnectNet.initialize(config, cfg.seed)
    best, result = train(
        net,
        dataset,
        args.epochs,
        args.lr,
        cfg.seed,
        args.batch_size,
        optimizer=args.optimizer,
        weight_decay=args.weight_decay,
    )
    save_weights(best, args.out)
    if args.curve is not None:
        save_curve(result, args.epochs, args.lr, args.curve)
    print(f"accuracy {result.accuracy:.4f}  loss {min(result.loss_curve):.6f}")
    return 0
