"""Masked multi-head self-attention with a hand-written backward pass.

Arrays are batched as (B, N, D). Keys whose mask is False receive zero
attention weight; every function is pure so one parameter set can serve
concurrent forward calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]
Params = dict[str, Array]

PROJECTIONS = ("q", "k", "v", "o")


def stable_softmax(scores: Array, key_mask: npt.NDArray[np.bool_]) -> Array:
    masked = np.where(key_mask, scores, -np.inf)
    shifted = masked - masked.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(weights: Array, grad_weights: Array) -> Array:
    inner = np.sum(grad_weights * weights, axis=-1, keepdims=True)
    return weights * (grad_weights - inner)


def _split(x: Array, heads: int) -> Array:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge(x: Array) -> Array:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


@dataclass(slots=True)
class AttentionCache:
    x: Array
    q: Array
    k: Array
    v: Array
    weights: Array
    context: Array
    scale: float


def init_attention(rng: np.random.Generator, prefix: str, width: int) -> Params:
    std = np.sqrt(2.0 / (width + width))
    params: Params = {}
    for name in PROJECTIONS:
        params[f"{prefix}.W{name}"] = rng.normal(0.0, std, size=(width, width))
        params[f"{prefix}.b{name}"] = np.zeros(width)
    return params


def attention_forward(
    x: Array, params: Params, prefix: str, key_mask: npt.NDArray[np.bool_], heads: int
) -> tuple[Array, AttentionCache]:
    """Residual block ``x + MHA(x)``."""
    q = _split(x @ params[f"{prefix}.Wq"] + params[f"{prefix}.bq"], heads)
    k = _split(x @ params[f"{prefix}.Wk"] + params[f"{prefix}.bk"], heads)
    v = _split(x @ params[f"{prefix}.Wv"] + params[f"{prefix}.bv"], heads)
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    weights = stable_softmax(scores, key_mask[:, None, None, :])
    context = _merge(weights @ v)
    out = x + context @ params[f"{prefix}.Wo"] + params[f"{prefix}.bo"]
    return out, AttentionCache(x, q, k, v, weights, context, scale)


def attention_backward(
    grad_out: Array, cache: AttentionCache, params: Params, prefix: str, heads: int
) -> tuple[Array, Params]:
    grads: Params = {}
    flat = grad_out.reshape(-1, grad_out.shape[-1])
    grads[f"{prefix}.Wo"] = cache.context.reshape(-1, cache.context.shape[-1]).T @ flat
    grads[f"{prefix}.bo"] = flat.sum(axis=0)
    grad_context = _split(grad_out @ params[f"{prefix}.Wo"].T, heads)

    grad_weights = grad_context @ cache.v.transpose(0, 1, 3, 2)
    grad_v = cache.weights.transpose(0, 1, 3, 2) @ grad_context
    grad_scores = softmax_backward(cache.weights, grad_weights) * cache.scale
    grad_q = grad_scores @ cache.k
    grad_k = grad_scores.transpose(0, 1, 3, 2) @ cache.q

    x_flat = cache.x.reshape(-1, cache.x.shape[-1])
    grad_x = grad_out.copy()
    for name, g in (("q", grad_q), ("k", grad_k), ("v", grad_v)):
        g_merged = _merge(g)
        g_flat = g_merged.reshape(-1, g_merged.shape[-1])
        grads[f"{prefix}.W{name}"] = x_flat.T @ g_flat
        grads[f"{prefix}.b{name}"] = g_flat.sum(axis=0)
        grad_x += g_merged @ params[f"{prefix}.W{name}"].T
    return grad_x, grads
