from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ...core.config import PipelineConfig
from ...core.logging import get_logger
from ...domain.scene import SceneSpec
from ...repositories.artifact_files import save_image
from ...repositories.graph_files import save_graph
from ...services.synth import fragment, generate_scene

log = get_logger(__name__)


def register(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    parents: list[argparse.ArgumentParser],
) -> None:
    p = subparsers.add_parser("synth", parents=parents, help="generate a synthetic scene")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--extent", type=int, nargs=2, default=(512, 512), metavar=("W", "H"))
    p.add_argument("--layout", choices=("grid", "comb"), default="grid")
    p.add_argument("--pitch", type=float, default=64.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--curve", type=float, default=0.0, help="curve amplitude in px")
    p.add_argument("--breaks", type=int, default=7)
    p.add_argument("--gap-len", type=float, default=24.0)
    p.add_argument("--image-format", choices=("png", "npy"), default="png")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    spec = SceneSpec(
        layout=args.layout,
        extent=(args.extent[0], args.extent[1]),
        pitch=args.pitch,
        jitter=args.jitter,
        drop_rate=args.drop_rate,
        curve_amplitude=args.curve,
        seed=cfg.seed,
    )
    gt, image = generate_scene(spec)
    frag = fragment(gt, args.breaks, args.gap_len, np.random.default_rng(cfg.seed))
    out: Path = args.out
    save_graph(gt, out / "gt.json")
    save_graph(frag.residual, out / "fragmented.json")
    save_image(image, out / f"image.{args.image_format}")
    log.info("synth_written", out=str(out), gaps=len(frag.gaps), nodes=len(gt.nodes))
    return 0
