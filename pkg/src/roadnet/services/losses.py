from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt
from scipy.optimize import linear_sum_assignment

from ..core.errors import ConfigError, ShapeMismatchError
from ..domain.losses import GlobalLossParts, LocalLossParts, LossWeights

SCHEDULE_CLAMP = 100
FOCAL_EPS = 1e-12

ArrayLike = npt.ArrayLike


def schedule(epoch: int) -> LossWeights:
    if epoch < 0:
        raise ConfigError("epoch must be non-negative")
    scale = math.exp(min(epoch, SCHEDULE_CLAMP) - SCHEDULE_CLAMP)
    return LossWeights(epoch=epoch, direct=2.0 * scale, connect=5.0 * scale)


def _pair(pred: ArrayLike, target: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatchError(f"prediction shape {p.shape} != target shape {t.shape}")
    return p, t


def l1_loss(pred: ArrayLike, target: ArrayLike) -> float:
    p, t = _pair(pred, target)
    if p.size == 0:
        return 0.0
    return float(np.abs(p - t).mean())


def bce(pred: ArrayLike, target: ArrayLike, eps: float = FOCAL_EPS) -> float:
    p, t = _pair(pred, target)
    p = np.clip(p, eps, 1.0 - eps)
    return float(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).mean())


def focal_loss(
    pred_bins: ArrayLike,
    target_bins: ArrayLike,
    gamma: float = 2.0,
    alpha: float = 0.25,
    eps: float = FOCAL_EPS,
) -> float:
    """Mean focal loss over all bins; alpha weights every bin alike."""
    p, t = _pair(pred_bins, target_bins)
    p = np.clip(p, eps, 1.0 - eps)
    p_t = np.where(t >= 0.5, p, 1.0 - p)
    return float((-alpha * (1.0 - p_t) ** gamma * np.log(p_t)).mean())


def bce_with_logits(
    logits: ArrayLike, target: ArrayLike
) -> tuple[float, npt.NDArray[np.float64]]:
    """Numerically stable mean BCE on raw logits and its gradient."""
    z, t = _pair(logits, target)
    if z.size == 0:
        return 0.0, np.zeros_like(z)
    per = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    grad = (_sigmoid(z) - t) / z.size
    return float(per.mean()), grad


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def combined_global_loss(parts: GlobalLossParts, weights: LossWeights) -> float:
    return (
        weights.g_coord * parts.coord
        + weights.direct * parts.direct
        + weights.connect * parts.connect
        + weights.g_reconstruction * parts.reconstruction
    )


def combined_local_loss(parts: LocalLossParts, weights: LossWeights | None = None) -> float:
    weights = weights or schedule(SCHEDULE_CLAMP)
    return (
        weights.l_coord * parts.coord
        + weights.prob * parts.prob
        + weights.l_reconstruction * parts.reconstruction
    )


def assign_nodes(pred: ArrayLike, target: ArrayLike) -> list[tuple[int, int]]:
    """Minimum-total-L1 one-to-one assignment of predicted to target points.

    Returns (pred index, target index) pairs sorted by prediction index.
    """
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if not len(p) or not len(t):
        return []
    cost = np.abs(p[:, None, :] - t[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def global_stage_loss(
    pred_coords: ArrayLike,
    target_coords: ArrayLike,
    pred_bins: ArrayLike,
    target_bins: ArrayLike,
    connect_logits: ArrayLike,
    connect_labels: ArrayLike,
    epoch: int,
    recon: GlobalLossParts | None = None,
) -> tuple[float, GlobalLossParts]:
    """Matched global-stage objective; ``recon`` carries the denoising-group terms."""
    pc = np.asarray(pred_coords, dtype=np.float64).reshape(-1, 2)
    tc = np.asarray(target_coords, dtype=np.float64).reshape(-1, 2)
    pb = np.asarray(pred_bins, dtype=np.float64)
    tb = np.asarray(target_bins, dtype=np.float64)
    matches = assign_nodes(pc, tc)
    rows = [i for i, _ in matches]
    cols = [j for _, j in matches]
    coord = l1_loss(pc[rows], tc[cols]) if matches else 0.0
    direct = focal_loss(pb[rows], tb[cols]) if matches else 0.0
    connect, _ = bce_with_logits(connect_logits, connect_labels)
    reconstruction = 0.0
    if recon is not None:
        reconstruction = recon.coord + recon.direct + recon.connect
    parts = GlobalLossParts(coord, direct, connect, reconstruction)
    return combined_global_loss(parts, schedule(epoch)), parts


def local_stage_loss(
    pred_coords: ArrayLike,
    pred_probs: ArrayLike,
    target_coords: ArrayLike,
    recon: LocalLossParts | None = None,
) -> tuple[float, LocalLossParts]:
    """Matched local-stage objective.

    Matched proposals target probability 1, unmatched proposals 0 and every
    missed target counts as a probability-0 prediction of a real node.
    """
    pc = np.asarray(pred_coords, dtype=np.float64).reshape(-1, 2)
    pp = np.asarray(pred_probs, dtype=np.float64).reshape(-1)
    tc = np.asarray(target_coords, dtype=np.float64).reshape(-1, 2)
    matches = assign_nodes(pc, tc)
    rows = [i for i, _ in matches]
    cols = [j for _, j in matches]
    coord = l1_loss(pc[rows], tc[cols]) if matches else 0.0
    prob_target = np.zeros_like(pp)
    prob_target[rows] = 1.0
    missed = len(tc) - len(matches)
    probs = np.concatenate([pp, np.zeros(missed)])
    targets = np.concatenate([prob_target, np.ones(missed)])
    prob = l1_loss(probs, targets)
    reconstruction = 0.0 if recon is None else recon.coord + recon.prob
    parts = LocalLossParts(coord, prob, reconstruction)
    return combined_local_loss(parts), parts
