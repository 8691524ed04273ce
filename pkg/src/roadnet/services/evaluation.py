from __future__ import annotations

from dataclasses import asdict

from ..core.config import PipelineConfig
from ..core.logging import get_logger
from ..core.observability import stage
from ..domain.graph import RoadGraph
from ..domain.metrics import AplsConfig, MetricReport, TopoConfig
from .apls import apls
from .topo import topo

log = get_logger(__name__)

TABLE_COLUMNS = ("TOPO-P", "TOPO-R", "TOPO-F1", "APLS")


def topo_config(cfg: PipelineConfig) -> TopoConfig:
    return TopoConfig(
        seed_spacing=cfg.seed_spacing,
        match_radius=cfg.match_radius,
        angle_tolerance=cfg.angle_tolerance,
        propagation_radius=cfg.propagation_radius,
        hole_spacing=cfg.hole_spacing,
    )


def apls_config(cfg: PipelineConfig) -> AplsConfig:
    return AplsConfig(
        mode=cfg.apls_mode,
        samples=cfg.apls_samples,
        exhaustive_limit=cfg.apls_exhaustive_limit,
        snap_radius=cfg.apls_snap_radius,
        densify_step=cfg.densify_step,
        seed=cfg.seed,
    )


def evaluate(gt: RoadGraph, pred: RoadGraph, cfg: PipelineConfig | None = None) -> MetricReport:
    cfg = cfg or PipelineConfig()
    tcfg, acfg = topo_config(cfg), apls_config(cfg)
    with stage("evaluate_topo"):
        t = topo(gt, pred, tcfg)
    with stage("evaluate_apls"):
        value, forward, backward, pairs = apls(gt, pred, acfg)
    report = MetricReport(
        topo_p=t.precision,
        topo_r=t.recall,
        topo_f1=t.f1,
        apls=value,
        apls_gt_to_pred=forward,
        apls_pred_to_gt=backward,
        per_seed=t.seeds,
        per_pair=pairs,
        config={"topo": asdict(tcfg), "apls": asdict(acfg)},
    )
    log.info("evaluated", topo_f1=t.f1, apls=value)
    return report


def format_table(rows: dict[str, MetricReport]) -> str:
    """Fixed-width percent table, one row per named report."""
    label_width = max([len("run")] + [len(k) for k in rows])
    header = f"{'run':<{label_width}}  " + "  ".join(f"{c:>8}" for c in TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    for name, report in rows.items():
        cells = "  ".join(f"{100.0 * v:>8.2f}" for v in report.as_row())
        lines.append(f"{name:<{label_width}}  {cells}")
    return "\n".join(lines)
