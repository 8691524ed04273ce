from __future__ import annotations

import argparse
import json
import sys
import uuid
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

import structlog

from .api.commands import (
    complete,
    evaluate,
    extract,
    labels,
    nodes,
    sweep_steps,
    synth,
    train_connect,
)
from .core.config import PipelineConfig, get_settings, load_pipeline_config
from .core.errors import EXIT_OK, EXIT_RUNTIME, AppError, ErrorPayload
from .core.logging import configure_logging, get_logger
from .core.observability import export_metrics, init_tracing, stage

log = get_logger(__name__)

COMMANDS = (synth, nodes, labels, train_connect, extract, complete, evaluate, sweep_steps)
APLS_MODES = {"harmonic": "harmonic", "paper-verbatim": "paper_verbatim"}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("pipeline")
    g.add_argument("--preset", choices=("city-scale", "spacenet3"))
    g.add_argument("--config", type=Path, help="YAML file overriding preset values")
    g.add_argument("--tile", type=int)
    g.add_argument("--overlap", type=int)
    g.add_argument("--connect-threshold", type=float)
    g.add_argument("--range-r", type=float)
    g.add_argument("--n-pt", type=int)
    g.add_argument("--feature-frame", choices=("canvas", "local"))
    g.add_argument("--max-steps", type=int)
    g.add_argument("--apls-mode", choices=tuple(APLS_MODES))
    g.add_argument("--seed", type=int)
    g.add_argument("--metrics-out", type=Path, help="write runtime metrics as a textfile")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadnet", description="Road-network graph extraction, completion and scoring"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [_common_flags()]
    for module in COMMANDS:
        module.register(subparsers, parents)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "tile": args.tile,
        "overlap": args.overlap,
        "connect_threshold": args.connect_threshold,
        "range_r": args.range_r,
        "n_pt": args.n_pt,
        "feature_frame": args.feature_frame,
        "max_steps": args.max_steps,
        "apls_mode": APLS_MODES.get(args.apls_mode) if args.apls_mode else None,
        "seed": args.seed,
    }


def _fail(exc: AppError, run_id: str) -> int:
    payload = ErrorPayload(error=exc.code, message=exc.message, run_id=run_id)
    print(json.dumps(asdict(payload)), file=sys.stderr)
    return exc.exit_code


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    configure_logging(settings)
    init_tracing(settings)
    run_id = uuid.uuid4().hex[:12]
    structlog.contextvars.bind_contextvars(run_id=run_id)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, usage errors 2
        return exc.code if isinstance(exc.code, int) else EXIT_OK

    try:
        cfg: PipelineConfig = load_pipeline_config(args.preset, args.config, _overrides(args))
        with stage(f"cmd_{args.command.replace('-', '_')}"):
            code: int = args.handler(args, cfg)
        log.info("command_done", command=args.command)
        return code
    except AppError as exc:
        log.error("command_failed", command=args.command, error=exc.code, message=exc.message)
        return _fail(exc, run_id)
    except Exception as exc:  # noqa: BLE001
        log.exception("command_crashed", command=args.command)
        return _fail(AppError("internal_error", str(exc), EXIT_RUNTIME), run_id)
    finally:
        if settings.ENABLE_METRICS:
            export_metrics(args.metrics_out or settings.METRICS_TEXTFILE)
        structlog.contextvars.unbind_contextvars("run_id")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
