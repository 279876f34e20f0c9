"""Layer primitives (linear, GRU, ego attention) with hand-written backward passes.

All math is float64. Forward functions come in two flavours: a plain one
returning the output, and a ``*_ctx`` one that also returns the cache needed
by the matching ``*_backward``. Backward functions accumulate into
``params.grads`` and return the gradient w.r.t. their inputs.

Conventions:
  linear   w (out, in), b (out,);  y = x @ w.T + b          x (..., in)
  gru      wz/wr/wh (hidden, in), uz/ur/uh (hidden, hidden), bz/br/bh (hidden,)
  attention wq/wk/wv (heads, d_head, dx); query from row 0 only
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    """Tensor dimensions do not match the declared layer wiring."""


class Params:
    """Named weight tensors plus same-shape gradient slots.

    ``kind`` is one of {"linear", "gru", "ego_attention"}; ``meta`` carries
    non-tensor layer config (relu flag, head count, ...).
    """

    def __init__(self, kind: str, weights: dict[str, np.ndarray], **meta):
        self.kind = kind
        self.weights = {k: np.asarray(v, dtype=np.float64) for k, v in weights.items()}
        self.grads = {k: np.zeros_like(v) for k, v in self.weights.items()}
        self.meta = meta

    def names(self) -> list[str]:
        return sorted(self.weights)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy_from(self, other: "Params") -> None:
        for name, w in other.weights.items():
            self.weights[name][...] = w

    def clone(self) -> "Params":
        p = Params(self.kind, {k: v.copy() for k, v in self.weights.items()}, **self.meta)
        return p

    def __repr__(self) -> str:  # pragma: no cover
        dims = {k: v.shape for k, v in self.weights.items()}
        return f"Params({self.kind}, {dims})"


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign for overflow safety at large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax; rows of all -inf come out uniform-free as zeros."""
    m = np.max(logits, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(logits - m)
    s = np.sum(e, axis=axis, keepdims=True)
    return e / np.where(s == 0.0, 1.0, s)


# ---------------------------------------------------------------------------
# linear
# ---------------------------------------------------------------------------

def linear_init(rng: np.random.Generator, in_dim: int, out_dim: int,
                relu: bool = False, bias: bool = True) -> Params:
    w = glorot_uniform(rng, in_dim, out_dim, (out_dim, in_dim))
    weights = {"w": w}
    if bias:
        weights["b"] = np.zeros(out_dim)
    return Params("linear", weights, relu=relu, bias=bias,
                  in_dim=in_dim, out_dim=out_dim)


def linear_forward_ctx(p: Params, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    w = p.weights["w"]
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear expects inner dim {w.shape[1]}, got {x.shape}")
    z = x @ w.T
    if p.meta.get("bias", True):
        z = z + p.weights["b"]
    if p.meta.get("relu"):
        y = np.maximum(z, 0.0)
    else:
        y = z
    return y, (x, z)


def linear_forward(p: Params, x: np.ndarray) -> np.ndarray:
    y, _ = linear_forward_ctx(p, x)
    return y


def linear_backward(p: Params, ctx, grad_y: np.ndarray) -> np.ndarray:
    x, z = ctx
    if p.meta.get("relu"):
        grad_y = grad_y * (z > 0.0)
    # Collapse leading dims so the same code serves single and batched input.
    gflat = grad_y.reshape(-1, grad_y.shape[-1])
    xflat = x.reshape(-1, x.shape[-1])
    p.grads["w"] += gflat.T @ xflat
    if p.meta.get("bias", True):
        p.grads["b"] += gflat.sum(axis=0)
    return grad_y @ p.weights["w"]


def relu_margin(ctx) -> float:
    """Smallest |pre-activation| of a relu linear ctx (inf when no relu)."""
    _, z = ctx
    return float(np.min(np.abs(z))) if z.size else math.inf


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

def gru_init(rng: np.random.Generator, in_dim: int, hidden: int) -> Params:
    def w(shape, fi, fo):
        return glorot_uniform(rng, fi, fo, shape)

    weights = {
        "wz": w((hidden, in_dim), in_dim, hidden),
        "uz": w((hidden, hidden), hidden, hidden),
        "bz": np.zeros(hidden),
        "wr": w((hidden, in_dim), in_dim, hidden),
        "ur": w((hidden, hidden), hidden, hidden),
        "br": np.zeros(hidden),
        "wh": w((hidden, in_dim), in_dim, hidden),
        "uh": w((hidden, hidden), hidden, hidden),
        "bh": np.zeros(hidden),
    }
    return Params("gru", weights, in_dim=in_dim, hidden=hidden)


def gru_forward_ctx(p: Params, x: np.ndarray, h_prev: np.ndarray):
    """Gate equations:
        z = sigma(Wz x + Uz h + bz)
        r = sigma(Wr x + Ur h + br)
        hc = tanh(Wh x + Uh (r*h) + bh)
        h' = (1 - z) * h + z * hc
    Returns (output, h_new) with output == h_new.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    w = p.weights
    if x.shape[-1] != p.meta["in_dim"] or h_prev.shape[-1] != p.meta["hidden"]:
        raise ShapeError(
            f"gru expects in={p.meta['in_dim']} hidden={p.meta['hidden']}, "
            f"got x{x.shape} h{h_prev.shape}")
    z = sigmoid(x @ w["wz"].T + h_prev @ w["uz"].T + w["bz"])
    r = sigmoid(x @ w["wr"].T + h_prev @ w["ur"].T + w["br"])
    rh = r * h_prev
    hc = np.tanh(x @ w["wh"].T + rh @ w["uh"].T + w["bh"])
    h_new = (1.0 - z) * h_prev + z * hc
    return (h_new, h_new), (x, h_prev, z, r, rh, hc)


def gru_forward(p: Params, x: np.ndarray, h_prev: np.ndarray):
    (out, h_new), _ = gru_forward_ctx(p, x, h_prev)
    return out, h_new


def gru_backward(p: Params, ctx, grad_h: np.ndarray):
    """grad_h: dL/dh_new. Returns (grad_x, grad_h_prev)."""
    x, h_prev, z, r, rh, hc = ctx
    w = p.weights

    dz = grad_h * (hc - h_prev) * z * (1.0 - z)
    dhc = grad_h * z * (1.0 - hc * hc)
    dh_prev = grad_h * (1.0 - z)

    def accum(wk, uk, bk, dgate, hin):
        gflat = dgate.reshape(-1, dgate.shape[-1])
        p.grads[wk] += gflat.T @ x.reshape(-1, x.shape[-1])
        p.grads[uk] += gflat.T @ hin.reshape(-1, hin.shape[-1])
        p.grads[bk] += gflat.sum(axis=0)

    accum("wh", "uh", "bh", dhc, rh)
    drh = dhc @ w["uh"]
    dr = drh * h_prev * r * (1.0 - r)
    dh_prev = dh_prev + drh * r
    accum("wr", "ur", "br", dr, h_prev)
    accum("wz", "uz", "bz", dz, h_prev)

    grad_x = dhc @ w["wh"] + dr @ w["wr"] + dz @ w["wz"]
    dh_prev = dh_prev + dr @ w["ur"] + dz @ w["uz"]
    return grad_x, dh_prev


# ---------------------------------------------------------------------------
# ego attention
# ---------------------------------------------------------------------------

def attention_init(rng: np.random.Generator, dx: int, d_head: int, heads: int) -> Params:
    weights = {
        "wq": glorot_uniform(rng, dx, d_head, (heads, d_head, dx)),
        "wk": glorot_uniform(rng, dx, d_head, (heads, d_head, dx)),
        "wv": glorot_uniform(rng, dx, d_head, (heads, d_head, dx)),
    }
    return Params("ego_attention", weights, dx=dx, d_head=d_head, heads=heads)


def attention_forward_ctx(p: Params, feats: np.ndarray, mask: np.ndarray | None = None):
    """Single query from row 0, keys/values from all rows.

    feats: (I, dx) or (B, I, dx); mask: same leading shape, (I,) / (B, I)
    booleans, True = row participates. Output width heads * d_head.
    """
    feats = np.asarray(feats, dtype=np.float64)
    single = feats.ndim == 2
    if single:
        feats = feats[None]
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)[None]
    if feats.shape[1] < 1:
        raise ShapeError("attention needs at least the ego row")
    if feats.shape[-1] != p.meta["dx"]:
        raise ShapeError(f"attention expects dx={p.meta['dx']}, got {feats.shape}")
    w = p.weights
    scale = 1.0 / math.sqrt(p.meta["d_head"])
    # q: (B, H, d); k, v: (B, H, I, d)
    q = np.einsum("hdx,bx->bhd", w["wq"], feats[:, 0])
    k = np.einsum("hdx,bix->bhid", w["wk"], feats)
    v = np.einsum("hdx,bix->bhid", w["wv"], feats)
    logits = np.einsum("bhd,bhid->bhi", q, k) * scale
    if mask is not None:
        logits = np.where(mask[:, None, :], logits, -np.inf)
    att = softmax(logits, axis=-1)  # (B, H, I)
    out_h = np.einsum("bhi,bhid->bhd", att, v)
    out = out_h.reshape(feats.shape[0], -1)  # (B, H*d)
    ctx = (feats, mask, q, k, v, att, single)
    return (out[0] if single else out), ctx


def attention_forward(p: Params, feats: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    out, _ = attention_forward_ctx(p, feats, mask)
    return out


def ego_attention_forward(p: Params, ego_feat: np.ndarray, all_feats: np.ndarray,
                          mask: np.ndarray | None = None) -> np.ndarray:
    """Convenience wrapper taking the ego row separately; ego must be row 0."""
    all_feats = np.asarray(all_feats, dtype=np.float64)
    if all_feats.shape[0] < 1:
        raise ShapeError("attention needs at least the ego row")
    if not np.array_equal(np.asarray(ego_feat, dtype=np.float64), all_feats[0]):
        raise ShapeError("ego_feat must equal row 0 of all_feats")
    return attention_forward(p, all_feats, mask)


def attention_backward(p: Params, ctx, grad_out: np.ndarray) -> np.ndarray:
    """Returns grad w.r.t. feats, same shape as the forward input."""
    feats, mask, q, k, v, att, single = ctx
    if single:
        grad_out = grad_out[None]
    B = feats.shape[0]
    scale = 1.0 / math.sqrt(p.meta["d_head"])
    g = grad_out.reshape(B, p.meta["heads"], p.meta["d_head"])  # (B,H,d)

    datt = np.einsum("bhd,bhid->bhi", g, v)
    dv = np.einsum("bhi,bhd->bhid", att, g)
    # softmax backward per (b, h) row
    dot = np.sum(datt * att, axis=-1, keepdims=True)
    dlogits = att * (datt - dot) * scale
    dq = np.einsum("bhi,bhid->bhd", dlogits, k)
    dk = np.einsum("bhi,bhd->bhid", dlogits, q)

    p.grads["wq"] += np.einsum("bhd,bx->hdx", dq, feats[:, 0])
    p.grads["wk"] += np.einsum("bhid,bix->hdx", dk, feats)
    p.grads["wv"] += np.einsum("bhid,bix->hdx", dv, feats)

    dfeats = np.einsum("bhid,hdx->bix", dk, p.weights["wk"])
    dfeats += np.einsum("bhid,hdx->bix", dv, p.weights["wv"])
    dego = np.einsum("bhd,hdx->bx", dq, p.weights["wq"])
    dfeats[:, 0] += dego
    return dfeats[0] if single else dfeats


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def mse_loss_backward(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = max(diff.size, 1)
    loss = float(np.sum(diff * diff) / n)
    grad = (2.0 / n) * diff
    return loss, grad
