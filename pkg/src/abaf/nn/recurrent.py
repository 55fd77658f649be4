"""Sequence layers: LSTM, scalar-score temporal attention, multi-head attention.

The LSTM is a single layer with zero initial state, gate order (input, forget,
cell, output), returning the full hidden sequence.  Temporal attention scores
each step with a learned projection s_t = v . h_t + c, softmaxes over time,
and returns the weighted sum of hidden states.

Multi-head attention is bias-free and supports two parameter conventions:

* ``split``: one (E, E) projection per role, heads carved out of E, so
  Q/K/V/O together hold 4*E^2 parameters.
* ``full``: every head projects at full width E with its own (E, E) Q/K/V,
  and the output projection maps the h*E concatenation back to E, giving
  3*h*E^2 + h*E^2 parameters (1,048,576 at E=256, h=4).
"""

from __future__ import annotations

import numpy as np

from abaf.nn.layers import _uniform_init
from abaf.nn.params import Module, Parameter


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax_last(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class LSTM(Module):
    """seq (N, T, D_in) -> hidden sequence (N, T, D_h), zero initial state."""

    def __init__(self, d_in: int, d_hidden: int, rng: np.random.Generator):
        super().__init__()
        self.d_in = d_in
        self.d_hidden = d_hidden
        self.w_x = Parameter(_uniform_init(rng, (4 * d_hidden, d_in), d_in))
        self.w_h = Parameter(_uniform_init(rng, (4 * d_hidden, d_hidden), d_hidden))
        self.bias = Parameter(_uniform_init(rng, (4 * d_hidden,), d_hidden))
        self._cache: dict | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.d_in:
            raise ValueError(f"expected (N, T, {self.d_in}), got {x.shape}")
        n, t_len, _ = x.shape
        dh = self.d_hidden
        h = np.zeros((n, dh))
        c = np.zeros((n, dh))
        h_seq = np.empty((n, t_len, dh))
        gates, cells, h_prevs, c_prevs = [], [], [], []
        for t in range(t_len):
            z = x[:, t] @ self.w_x.value.T + h @ self.w_h.value.T + self.bias.value
            gi = _sigmoid(z[:, :dh])
            gf = _sigmoid(z[:, dh : 2 * dh])
            gg = np.tanh(z[:, 2 * dh : 3 * dh])
            go = _sigmoid(z[:, 3 * dh :])
            h_prevs.append(h)
            c_prevs.append(c)
            c = gf * c + gi * gg
            h = go * np.tanh(c)
            gates.append((gi, gf, gg, go))
            cells.append(c)
            h_seq[:, t] = h
        self._cache = {
            "x": x,
            "gates": gates,
            "cells": cells,
            "h_prevs": h_prevs,
            "c_prevs": c_prevs,
        }
        return h_seq

    def backward(self, grad_seq: np.ndarray) -> np.ndarray:
        cache = self._cache
        x = cache["x"]
        n, t_len, _ = x.shape
        dh = self.d_hidden
        grad_x = np.zeros_like(x)
        dh_next = np.zeros((n, dh))
        dc_next = np.zeros((n, dh))
        for t in range(t_len - 1, -1, -1):
            gi, gf, gg, go = cache["gates"][t]
            c = cache["cells"][t]
            tanh_c = np.tanh(c)
            d_h = grad_seq[:, t] + dh_next
            d_o = d_h * tanh_c
            d_c = dc_next + d_h * go * (1.0 - tanh_c**2)
            d_i = d_c * gg
            d_g = d_c * gi
            d_f = d_c * cache["c_prevs"][t]
            dc_next = d_c * gf
            dz = np.concatenate(
                [
                    d_i * gi * (1.0 - gi),
                    d_f * gf * (1.0 - gf),
                    d_g * (1.0 - gg**2),
                    d_o * go * (1.0 - go),
                ],
                axis=1,
            )
            self.w_x.grad += dz.T @ x[:, t]
            self.w_h.grad += dz.T @ cache["h_prevs"][t]
            self.bias.grad += dz.sum(axis=0)
            grad_x[:, t] = dz @ self.w_x.value
            dh_next = dz @ self.w_h.value
        return grad_x


class TemporalAttention(Module):
    """(N, T, D) -> (N, D): softmax over time of s_t = v . h_t + c."""

    def __init__(self, d: int, rng: np.random.Generator):
        super().__init__()
        self.v = Parameter(_uniform_init(rng, (d,), d))
        self.c = Parameter(np.zeros(()))
        self._cache: tuple | None = None

    def forward(self, h: np.ndarray) -> np.ndarray:
        if h.ndim != 3 or h.shape[2] != self.v.value.size:
            raise ValueError(f"expected (N, T, {self.v.value.size}), got {h.shape}")
        scores = h @ self.v.value + self.c.value
        alpha = _softmax_last(scores)
        self._cache = (h, alpha)
        return (alpha[:, :, None] * h).sum(axis=1)

    def attention_weights(self) -> np.ndarray:
        """(N, T) softmax weights from the latest forward pass."""
        if self._cache is None:
            raise RuntimeError("no forward pass recorded")
        return self._cache[1]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        h, alpha = self._cache
        grad_h = alpha[:, :, None] * grad_out[:, None, :]
        d_alpha = (h * grad_out[:, None, :]).sum(axis=2)
        d_scores = alpha * (d_alpha - (alpha * d_alpha).sum(axis=1, keepdims=True))
        self.v.grad += np.einsum("nt,ntd->d", d_scores, h)
        self.c.grad += d_scores.sum()
        grad_h += d_scores[:, :, None] * self.v.value
        return grad_h


class MultiHeadAttention(Module):
    """Bias-free self-attention over (N, T, E); see module docstring."""

    def __init__(
        self,
        embed_dim: int,
        n_heads: int,
        rng: np.random.Generator,
        convention: str = "split",
    ):
        super().__init__()
        if convention not in ("split", "full"):
            raise ValueError(f"convention must be 'split' or 'full', got {convention!r}")
        if convention == "split" and embed_dim % n_heads:
            raise ValueError(f"embed dim {embed_dim} not divisible by {n_heads} heads")
        self.embed_dim = embed_dim
        self.n_heads = n_heads
        self.convention = convention
        e, h = embed_dim, n_heads
        if convention == "split":
            self.w_q = Parameter(_uniform_init(rng, (e, e), e))
            self.w_k = Parameter(_uniform_init(rng, (e, e), e))
            self.w_v = Parameter(_uniform_init(rng, (e, e), e))
            self.w_o = Parameter(_uniform_init(rng, (e, e), e))
            self.d_head = e // h
        else:
            self.w_q = Parameter(_uniform_init(rng, (h, e, e), e))
            self.w_k = Parameter(_uniform_init(rng, (h, e, e), e))
            self.w_v = Parameter(_uniform_init(rng, (h, e, e), e))
            self.w_o = Parameter(_uniform_init(rng, (e, h * e), h * e))
            self.d_head = e
        self._cache: dict | None = None

    def _project(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """(N, T, E) -> (N, heads, T, d_head) under the active convention."""
        n, t, e = x.shape
        if self.convention == "split":
            y = x @ w.T
            return y.reshape(n, t, self.n_heads, self.d_head).transpose(0, 2, 1, 3)
        return np.einsum("nte,hfe->nhtf", x, w)

    def _project_back(self, g: np.ndarray, x: np.ndarray, w: np.ndarray):
        """Gradients of a head projection: returns (grad_x, grad_w)."""
        n, _, t, _ = g.shape
        if self.convention == "split":
            g2 = g.transpose(0, 2, 1, 3).reshape(n, t, self.embed_dim)
            gw = np.einsum("ntf,nte->fe", g2, x)
            return g2 @ w, gw
        gw = np.einsum("nhtf,nte->hfe", g, x)
        gx = np.einsum("nhtf,hfe->nte", g, w)
        return gx, gw

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.embed_dim:
            raise ValueError(f"expected (N, T, {self.embed_dim}), got {x.shape}")
        n, t, e = x.shape
        q = self._project(x, self.w_q.value)
        k = self._project(x, self.w_k.value)
        v = self._project(x, self.w_v.value)
        scale = 1.0 / np.sqrt(self.d_head)
        scores = np.einsum("nhtf,nhsf->nhts", q, k) * scale
        alpha = _softmax_last(scores)
        ctx = np.einsum("nhts,nhsf->nhtf", alpha, v)
        concat = ctx.transpose(0, 2, 1, 3).reshape(n, t, self.n_heads * self.d_head)
        out = concat @ self.w_o.value.T
        self._cache = {"x": x, "q": q, "k": k, "v": v, "alpha": alpha, "concat": concat}
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        c = self._cache
        x, q, k, v, alpha = c["x"], c["q"], c["k"], c["v"], c["alpha"]
        n, t, e = x.shape
        scale = 1.0 / np.sqrt(self.d_head)

        self.w_o.grad += np.einsum("nte,ntf->ef", grad_out, c["concat"])
        g_concat = grad_out @ self.w_o.value
        g_ctx = g_concat.reshape(n, t, self.n_heads, self.d_head).transpose(0, 2, 1, 3)

        g_alpha = np.einsum("nhtf,nhsf->nhts", g_ctx, v)
        g_v = np.einsum("nhts,nhtf->nhsf", alpha, g_ctx)
        g_scores = alpha * (g_alpha - (alpha * g_alpha).sum(axis=-1, keepdims=True))
        g_q = np.einsum("nhts,nhsf->nhtf", g_scores, k) * scale
        g_k = np.einsum("nhts,nhtf->nhsf", g_scores, q) * scale

        grad_x = np.zeros_like(x)
        for g_head, src, w in ((g_q, x, self.w_q), (g_k, x, self.w_k), (g_v, x, self.w_v)):
            gx, gw = self._project_back(g_head, src, w.value)
            grad_x += gx
            w.grad += gw
        return grad_x
