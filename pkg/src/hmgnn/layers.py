"""Differentiable building blocks with hand-written backward passes.

Each layer object caches what its last ``forward`` needs and exposes a
``backward(upstream)`` returning ``(input_grads, param_grads)``. Parameters
are plain arrays passed to ``forward``; layers own no state besides the cache,
so one instance can be reused across examples (not concurrently).
"""
from __future__ import annotations

import numpy as np

from .numerics import (
    DEFAULT_LEAKY_SLOPE,
    DTYPE,
    DomainError,
    leaky_relu,
    leaky_relu_grad,
    ordered_matmul,
    relu,
    sigmoid,
    softmax_backward,
    softmax_stable,
)

PROB_FLOOR = 1e-12


class UsageError(RuntimeError):
    """``backward`` was called before any ``forward``."""


class ShapeError(ValueError):
    pass


class _Cached:
    _cache = None

    def _need_cache(self):
        if self._cache is None:
            raise UsageError(f"{type(self).__name__}.backward called before forward")
        return self._cache


# ---------------------------------------------------------------- BiLSTM

def _lstm_run(x, W, U, b):
    n = x.shape[0]
    hdim = U.shape[1]
    h = np.zeros(hdim)
    c = np.zeros(hdim)
    hs = np.zeros((n, hdim))
    steps = []
    for t in range(n):
        z = W @ x[t] + U @ h + b
        i = sigmoid(z[:hdim])
        f = sigmoid(z[hdim:2 * hdim])
        g = np.tanh(z[2 * hdim:3 * hdim])
        o = sigmoid(z[3 * hdim:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[t] = h
        steps.append((i, f, g, o, c_prev, h_prev, tc))
    return hs, steps


def _lstm_back(dhs, x, W, U, steps):
    n, hdim = dhs.shape
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * hdim)
    dx = np.zeros_like(x)
    dh_next = np.zeros(hdim)
    dc_next = np.zeros(hdim)
    for t in reversed(range(n)):
        i, f, g, o, c_prev, h_prev, tc = steps[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        dW += np.outer(dz, x[t])
        dU += np.outer(dz, h_prev)
        db += dz
        dx[t] = W.T @ dz
        dh_next = U.T @ dz
        dc_next = dc * f
    return dx, dW, dU, db


class BiLSTM(_Cached):
    """Bidirectional LSTM with zero initial states; gate order is input, forget, cell, output.

    ``params`` holds ``fwd.W`` (4H x D), ``fwd.U`` (4H x H), ``fwd.b`` (4H) and
    the same three for ``bwd``. Row t of the output is ``[fwd_t, bwd_t]``.
    """

    names = ("fwd.W", "fwd.U", "fwd.b", "bwd.W", "bwd.U", "bwd.b")

    def forward(self, x, params) -> np.ndarray:
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ShapeError("BiLSTM input must be a non-empty n x D matrix")
        hf, sf = _lstm_run(x, params["fwd.W"], params["fwd.U"], params["fwd.b"])
        xr = x[::-1]
        hb, sb = _lstm_run(xr, params["bwd.W"], params["bwd.U"], params["bwd.b"])
        self._cache = (x, xr, params, sf, sb, hf.shape[1])
        return np.concatenate([hf, hb[::-1]], axis=1)

    def backward(self, dH):
        x, xr, params, sf, sb, hdim = self._need_cache()
        dx_f, dWf, dUf, dbf = _lstm_back(dH[:, :hdim], x, params["fwd.W"], params["fwd.U"], sf)
        dx_b, dWb, dUb, dbb = _lstm_back(dH[::-1, hdim:], xr, params["bwd.W"], params["bwd.U"], sb)
        grads = {"fwd.W": dWf, "fwd.U": dUf, "fwd.b": dbf,
                 "bwd.W": dWb, "bwd.U": dUb, "bwd.b": dbb}
        return dx_f + dx_b[::-1], grads


# ---------------------------------------------------------------- graph layers

class GraphAttention(_Cached):
    """Single-head graph attention restricted to each node's neighbourhood.

    score(i, j) = a[:d'] . W h_i + a[d':] . W h_j, normalised by softmax over
    ``{j : adj[i, j] > 0}`` after LeakyReLU; the output is
    ``ReLU(sum_j alpha_ij W h_j)`` with ``j`` summed in ascending order.
    """

    def __init__(self, slope: float = DEFAULT_LEAKY_SLOPE):
        self.slope = slope
        self.attention = None

    def forward(self, h_in, adj, W, a) -> np.ndarray:
        h_in = np.asarray(h_in, dtype=DTYPE)
        adj = np.asarray(adj)
        n = h_in.shape[0]
        d_out = W.shape[0]
        if W.shape[1] != h_in.shape[1]:
            raise ShapeError(f"GAT weight {W.shape} does not accept width {h_in.shape[1]}")
        if a.shape != (2 * d_out,):
            raise ShapeError(f"attention vector must have length {2 * d_out}")
        if adj.shape != (n, n):
            raise ShapeError(f"adjacency {adj.shape} does not match {n} nodes")
        mask = adj > 0
        if not mask.any(axis=1).all():
            raise RuntimeError("isolated node in GAT input; adjacency lacks self-loops")

        z = ordered_matmul(h_in, W.T)
        e = (z @ a[:d_out])[:, None] + (z @ a[d_out:])[None, :]
        s = leaky_relu(e, self.slope)
        s = np.where(mask, s, -np.inf)
        s = s - s.max(axis=1, keepdims=True)
        w = np.where(mask, np.exp(s), 0.0)
        alpha = w / w.sum(axis=1, keepdims=True)
        pre = ordered_matmul(alpha, z)
        self.attention = alpha
        self._cache = (h_in, W, a, z, e, alpha, pre, mask)
        return relu(pre)

    def backward(self, dout):
        h_in, W, a, z, e, alpha, pre, mask = self._need_cache()
        d_out = W.shape[0]
        dpre = dout * (pre > 0)
        dalpha = dpre @ z.T
        dz = alpha.T @ dpre
        ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        de = np.where(mask, ds * leaky_relu_grad(e, self.slope), 0.0)
        row = de.sum(axis=1)
        col = de.sum(axis=0)
        da = np.concatenate([z.T @ row, z.T @ col])
        dz += np.outer(row, a[:d_out]) + np.outer(col, a[d_out:])
        dW = dz.T @ h_in
        return dz @ W, {"W": dW, "a": da}


class GraphConvolution(_Cached):
    """``ReLU(sum_j adj[i, j] * W h_j + b)`` evaluated densely, ``j`` ascending."""

    def forward(self, h_in, adj, W, b) -> np.ndarray:
        h_in = np.asarray(h_in, dtype=DTYPE)
        if W.shape[1] != h_in.shape[1] or b.shape != (W.shape[0],):
            raise ShapeError(f"GCN shapes inconsistent: W {W.shape}, b {b.shape}, input {h_in.shape}")
        proj = ordered_matmul(h_in, W.T)
        pre = ordered_matmul(adj, proj) + b
        self._cache = (h_in, adj, W, pre)
        return relu(pre)

    def backward(self, dout):
        h_in, adj, W, pre = self._need_cache()
        dpre = dout * (pre > 0)
        dproj = adj.T @ dpre
        return dproj @ W, {"W": dproj.T @ h_in, "b": dpre.sum(axis=0)}


def aspect_mask(h, span) -> np.ndarray:
    """Zero every row outside the half-open span."""
    s, e = span
    if not 0 <= s < e <= h.shape[0]:
        raise DomainError(f"span {span} invalid for {h.shape[0]} rows")
    out = np.zeros_like(h)
    out[s:e] = h[s:e]
    return out


class AspectMask(_Cached):
    def forward(self, h, span):
        self._cache = tuple(span)
        return aspect_mask(h, span)

    def backward(self, dout):
        return aspect_mask(dout, self._need_cache()), {}


class RetrievalAttention(_Cached):
    """Attend over context states using their dot products with the aspect graph features.

    beta_t = sum_{i in span} h_lstm[t] . g[i], alpha = softmax(beta),
    r = sum_t alpha_t h_lstm[t].
    """

    def forward(self, h_lstm, g_masked, span) -> np.ndarray:
        if h_lstm.shape != g_masked.shape:
            raise ShapeError(f"width mismatch: {h_lstm.shape} vs {g_masked.shape}")
        s, e = span
        if not 0 <= s < e <= h_lstm.shape[0]:
            raise DomainError(f"span {span} invalid for {h_lstm.shape[0]} rows")
        query = g_masked[s:e].sum(axis=0)
        beta = h_lstm @ query
        alpha = softmax_stable(beta)
        self.attention = alpha
        self._cache = (h_lstm, query, alpha, (s, e))
        return alpha @ h_lstm

    def backward(self, dr):
        h_lstm, query, alpha, (s, e) = self._need_cache()
        dalpha = h_lstm @ dr
        dbeta = softmax_backward(alpha, dalpha)
        dh = np.outer(alpha, dr) + np.outer(dbeta, query)
        dg = np.zeros_like(h_lstm)
        dg[s:e] = dbeta @ h_lstm
        return (dh, dg), {}


class Classifier(_Cached):
    """Softmax over ``W r + b`` for the three polarity classes."""

    def forward(self, r, W, b) -> np.ndarray:
        if W.shape[0] != 3 or b.shape != (3,):
            raise ShapeError("classifier must have exactly 3 outputs")
        probs = softmax_stable(W @ r + b)
        self._cache = (r, W, probs)
        return probs

    def backward(self, dprobs):
        r, W, probs = self._need_cache()
        dlogits = softmax_backward(probs, dprobs)
        return W.T @ dlogits, {"W": np.outer(dlogits, r), "b": dlogits}


def cross_entropy(probs, label: int) -> float:
    return float(-np.log(max(probs[label], PROB_FLOOR)))


class CrossEntropy(_Cached):
    def forward(self, probs, label: int) -> float:
        self._cache = (np.asarray(probs, dtype=DTYPE), label)
        return cross_entropy(probs, label)

    def backward(self, dloss: float = 1.0):
        probs, label = self._need_cache()
        dprobs = np.zeros_like(probs)
        if probs[label] > PROB_FLOOR:
            dprobs[label] = -dloss / probs[label]
        return dprobs, {}
