"""Small differentiable kernel for the neural taggers.

Arrays are float64 numpy arrays. Each op comes as a ``*_forward`` returning its
output plus a cache, and a ``*_backward`` consuming the cache. Batched ops take
a leading batch axis; sequences are time-major ``(T, B, D)`` with a ``(T, B)``
0/1 mask, and masked steps carry the recurrent state through unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    pass


def _need(cond: bool, what: str, a, b):
    if not cond:
        raise ShapeError(f"{what}: shapes {tuple(np.shape(a))} and {tuple(np.shape(b))} do not match")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; identical across platforms for a given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape or (fan_in, fan_out)).astype(DTYPE)


def embedding_init(rng: np.random.Generator, n: int, dim: int, std: float = 0.1) -> np.ndarray:
    return (std * rng.standard_normal((n, dim))).astype(DTYPE)


@dataclass
class Params:
    """Named parameters with matching gradient buffers."""

    values: dict[str, np.ndarray] = field(default_factory=dict)
    grads: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.values:
            raise KeyError(f"duplicate parameter {name!r}")
        self.values[name] = np.asarray(value, dtype=DTYPE)
        self.grads[name] = np.zeros_like(self.values[name])
        return self.values[name]

    def __getitem__(self, name):
        return self.values[name]

    def __contains__(self, name):
        return name in self.values

    def names(self):
        return sorted(self.values)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def size(self) -> int:
        return sum(v.size for v in self.values.values())


# embedding

def embedding_forward(table: np.ndarray, idx) -> np.ndarray:
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"embedding index out of range for table of {table.shape[0]} rows")
    return table[idx]


def embedding_backward(dtable: np.ndarray, idx, dout: np.ndarray) -> None:
    idx = np.asarray(idx)
    _need(dout.shape == idx.shape + dtable.shape[1:], "embedding_backward", dout, idx)
    np.add.at(dtable, idx.reshape(-1), dout.reshape(-1, dtable.shape[1]))


# linear

def linear_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    _need(x.shape[-1] == W.shape[0], "linear", x, W)
    _need(b.shape == (W.shape[1],), "linear bias", b, W)
    return x @ W + b


def linear_backward(W: np.ndarray, x: np.ndarray, dy: np.ndarray):
    """Returns (dx, dW, db)."""
    _need(dy.shape == x.shape[:-1] + (W.shape[1],), "linear_backward", dy, x)
    x2 = x.reshape(-1, W.shape[0])
    d2 = dy.reshape(-1, W.shape[1])
    return dy @ W.T, x2.T @ d2, d2.sum(axis=0)


# gated recurrence (LSTM cell, gate order i, f, o, g)

def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_init(rng: np.random.Generator, in_dim: int, hidden: int):
    W = glorot(rng, in_dim + hidden, 4 * hidden)
    return W, np.zeros(4 * hidden, dtype=DTYPE)


def lstm_step_forward(W, b, x, h, c):
    H = h.shape[-1]
    _need(W.shape == (x.shape[-1] + H, 4 * H), "lstm_step", x, W)
    _need(h.shape == c.shape, "lstm_step state", h, c)
    xh = np.concatenate([x, h], axis=-1)
    z = xh @ W + b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    o = sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (xh, i, f, o, g, c, tc)


def lstm_step_backward(W, dh, dc, cache):
    """Returns (dx, dh_prev, dc_prev, dW, db)."""
    xh, i, f, o, g, c, tc = cache
    H = dh.shape[-1]
    do = dh * tc
    dcn = dc + dh * o * (1.0 - tc * tc)
    di = dcn * g
    dg = dcn * i
    df = dcn * c
    dc_prev = dcn * f
    dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=-1)
    dW = xh.reshape(-1, xh.shape[-1]).T @ dz.reshape(-1, 4 * H)
    db = dz.reshape(-1, 4 * H).sum(axis=0)
    dxh = dz @ W.T
    D = xh.shape[-1] - H
    return dxh[..., :D], dxh[..., D:], dc_prev, dW, db


def lstm_forward(W, b, xs, mask=None, reverse=False, h0=None, c0=None):
    """Run the cell over ``xs`` of shape (T, B, D); returns (hs, cache)."""
    T, B, _ = xs.shape
    H = b.shape[0] // 4
    if mask is None:
        mask = np.ones((T, B), dtype=DTYPE)
    _need(mask.shape == (T, B), "lstm mask", mask, xs)
    h = np.zeros((B, H), dtype=DTYPE) if h0 is None else h0
    c = np.zeros((B, H), dtype=DTYPE) if c0 is None else c0
    hs = np.zeros((T, B, H), dtype=DTYPE)
    steps = []
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        hn, cn, sc = lstm_step_forward(W, b, xs[t], h, c)
        m = mask[t][:, None]
        h = m * hn + (1 - m) * h
        c = m * cn + (1 - m) * c
        hs[t] = h
        steps.append((t, m, sc))
    return hs, (steps, xs.shape, reverse, c)


def lstm_backward(W, dhs, cache, dh_last=None, dc_last=None):
    """Backprop through time. Returns (dxs, dW, db, dh0, dc0).

    ``dh_last``/``dc_last`` are gradients on the state after the final
    processed step.
    """
    steps, shape, _, _ = cache
    T, B, D = shape
    H = dhs.shape[-1]
    dxs = np.zeros(shape, dtype=DTYPE)
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1], dtype=DTYPE)
    dh = np.zeros((B, H), dtype=DTYPE) if dh_last is None else dh_last.copy()
    dc = np.zeros((B, H), dtype=DTYPE) if dc_last is None else dc_last.copy()
    for t, m, sc in reversed(steps):
        dh = dh + dhs[t]
        dx, dhp, dcp, dWs, dbs = lstm_step_backward(W, m * dh, m * dc, sc)
        dxs[t] = dx
        dW += dWs
        db += dbs
        dh = dhp + (1 - m) * dh
        dc = dcp + (1 - m) * dc
    return dxs, dW, db, dh, dc


def bilstm_forward(Wf, bf, Wb, bb, xs, mask=None):
    """Concatenated forward/backward states, shape (T, B, 2H)."""
    hf, cf = lstm_forward(Wf, bf, xs, mask)
    hb, cb = lstm_forward(Wb, bb, xs, mask, reverse=True)
    return np.concatenate([hf, hb], axis=-1), (cf, cb)


def bilstm_backward(Wf, Wb, dout, cache):
    """Returns (dxs, dWf, dbf, dWb, dbb)."""
    cf, cb = cache
    H = dout.shape[-1] // 2
    dxf, dWf, dbf, _, _ = lstm_backward(Wf, np.ascontiguousarray(dout[..., :H]), cf)
    dxb, dWb, dbb, _, _ = lstm_backward(Wb, np.ascontiguousarray(dout[..., H:]), cb)
    return dxf + dxb, dWf, dbf, dWb, dbb


def bidirectional_encode(Wf, bf, Wb, bb, xs, mask=None):
    """Alias of :func:`bilstm_forward` that also returns each direction's final state."""
    out, cache = bilstm_forward(Wf, bf, Wb, bb, xs, mask)
    H = bf.shape[0] // 4
    return out, out[-1, :, :H], out[0, :, H:], cache


# dot-product attention

def masked_softmax(scores: np.ndarray, mask=None) -> np.ndarray:
    if mask is None:
        mask = np.ones(scores.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    _need(mask.shape == scores.shape, "masked_softmax", scores, mask)
    s = np.where(mask, scores, -np.inf)
    mx = s.max(axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.where(mask, np.exp(s - mx), 0.0)
    z = e.sum(axis=-1, keepdims=True)
    return e / np.where(z > 0, z, 1.0)


def attention_forward(q: np.ndarray, K: np.ndarray, mask=None):
    """Scaled dot-product attention of queries (B, d) over keys (B, N, d).

    Returns (weights, context, cache); ``cache`` also holds the raw scores.
    """
    _need(K.ndim == 3 and q.shape == (K.shape[0], K.shape[2]), "attention", q, K)
    scale = 1.0 / np.sqrt(K.shape[-1])
    scores = np.einsum("bnd,bd->bn", K, q) * scale
    w = masked_softmax(scores, mask)
    ctx = np.einsum("bn,bnd->bd", w, K)
    return w, ctx, (q, K, w, scale, scores)


def attention_backward(cache, dw=None, dctx=None, dscores=None):
    """Returns (dq, dK). ``dscores`` is a gradient on the pre-softmax scores."""
    q, K, w, scale, _ = cache
    dK = np.zeros_like(K)
    ds = np.zeros_like(w) if dscores is None else dscores.copy()
    dwt = np.zeros_like(w) if dw is None else dw.copy()
    if dctx is not None:
        dK += w[..., None] * dctx[:, None, :]
        dwt += np.einsum("bnd,bd->bn", K, dctx)
    if dw is not None or dctx is not None:
        ds += w * (dwt - (w * dwt).sum(axis=-1, keepdims=True))
    dq = np.einsum("bn,bnd->bd", ds, K) * scale
    dK += ds[..., None] * q[:, None, :] * scale
    return dq, dK


# loss

def softmax_cross_entropy(logits: np.ndarray, target, mask=None, weight=None):
    """Mean-free summed cross-entropy over rows of ``logits`` (B, N).

    Masked entries get probability exactly 0. ``weight`` (B,) scales each
    row, 0 disables it. Returns (loss, dlogits, probs).
    """
    logits = np.atleast_2d(logits)
    target = np.atleast_1d(np.asarray(target))
    _need(target.shape == (logits.shape[0],), "softmax_cross_entropy", logits, target)
    B = logits.shape[0]
    p = masked_softmax(logits, mask)
    wt = np.ones(B, dtype=DTYPE) if weight is None else np.asarray(weight, dtype=DTYPE)
    rows = np.arange(B)
    pt = p[rows, target]
    active = wt > 0
    if np.any(active & (pt <= 0)):
        raise ValueError("target entry is masked out")
    loss = float(-(wt[active] * np.log(pt[active])).sum())
    d = p.copy()
    d[rows, target] -= 1.0
    d *= wt[:, None]
    return loss, d, p


# optimizer

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: Params, state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8, clip: float | None = None) -> None:
    state.t += 1
    grads = params.grads
    if clip is not None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        scale = clip / norm if norm > clip else 1.0
    else:
        scale = 1.0
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name in params.names():
        g = grads[name] * scale
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        params.values[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        if not np.all(np.isfinite(params.values[name])):
            raise FloatingPointError(f"parameter {name} became non-finite")


# finite differences

def grad_check(f: Callable[[], tuple[float, dict[str, np.ndarray]]], values: dict[str, np.ndarray],
               epsilon: float = 1e-5, names=None, max_per_param: int | None = None,
               rng: np.random.Generator | None = None, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` evaluates the loss and analytic gradients at the current contents of
    ``values`` (perturbed in place). Relative error is
    ``|a - n| / max(|a| + |n|, floor)``.
    """
    _, analytic = f()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    worst = 0.0
    for name in names or sorted(values):
        arr = values[name]
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = (rng or make_rng(0)).choice(flat.size, max_per_param, replace=False)
        for j in idx:
            old = flat[j]
            flat[j] = old + epsilon
            lp, _ = f()
            flat[j] = old - epsilon
            lm, _ = f()
            flat[j] = old
            num = (lp - lm) / (2 * epsilon)
            a = analytic[name].reshape(-1)[j]
            err = abs(a - num) / max(abs(a) + abs(num), floor)
            worst = max(worst, err)
    return worst
