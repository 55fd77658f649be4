"""Convolution and pooling kernels, in numpy (im2col + BLAS) and numba forms.

Both variants of each kernel compute the same function; the active one is
frozen at import by :mod:`abaf.backend`.  The numba loops parallelise only
over the batch axis, where outputs are disjoint, so results do not depend on
thread scheduling.  Kernel-gradient accumulation keeps one partial per batch
row and reduces them in index order afterwards for the same reason.

All convolutions are 3x3 cross-correlations with zero padding 1 and stride 1;
pooling is 2x2 stride 2 with ties routed to the first window element in
row-major order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from abaf import backend


def _cols(x_padded: np.ndarray) -> np.ndarray:
    """(N*H*W, C*9) patch matrix for a padded (N, C, H+2, W+2) input."""
    n, c = x_padded.shape[0], x_padded.shape[1]
    h, w = x_padded.shape[2] - 2, x_padded.shape[3] - 2
    view = sliding_window_view(x_padded, (3, 3), axis=(2, 3))
    return view.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)


def _conv2d_forward_np(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n, _, h, w = x.shape
    f = kernel.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = _cols(xp) @ kernel.reshape(f, -1).T
    return out.reshape(n, h, w, f).transpose(0, 3, 1, 2)


def _conv2d_backward_np(
    x: np.ndarray, kernel: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    f = kernel.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    g_flat = grad_out.transpose(0, 2, 3, 1).reshape(n * h * w, f)
    grad_kernel = (g_flat.T @ _cols(xp)).reshape(f, c, 3, 3)
    # Input gradient is the correlation of grad_out with the spatially
    # flipped kernel, with the filter and channel axes swapped.
    k_flip = kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    gp = np.pad(grad_out, ((0, 0), (0, 0), (1, 1), (1, 1)))
    grad_x = _cols(gp) @ k_flip.reshape(c, -1).T
    return grad_x.reshape(n, h, w, c).transpose(0, 3, 1, 2), grad_kernel


def _maxpool_forward_np(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(n, c, h // 2, w // 2, 4)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx.astype(np.int64)


def _maxpool_backward_np(grad_out: np.ndarray, idx: np.ndarray, h: int, w: int) -> np.ndarray:
    n, c, h2, w2 = grad_out.shape
    flat = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(flat, idx[..., None], grad_out[..., None], axis=-1)
    return (
        flat.reshape(n, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


if backend.HAS_NUMBA:
    import numba
    from numba import prange

    @numba.njit(cache=True, parallel=True)
    def _conv2d_forward_nb(x, kernel):  # pragma: no cover
        n, c_in, h, w = x.shape
        f = kernel.shape[0]
        out = np.zeros((n, f, h, w))
        for bn in prange(n):
            for bf in range(f):
                for i in range(h):
                    for j in range(w):
                        acc = 0.0
                        for bc in range(c_in):
                            for m in range(3):
                                ii = i + m - 1
                                if 0 <= ii < h:
                                    for v in range(3):
                                        jj = j + v - 1
                                        if 0 <= jj < w:
                                            acc += x[bn, bc, ii, jj] * kernel[bf, bc, m, v]
                        out[bn, bf, i, j] = acc
        return out

    @numba.njit(cache=True, parallel=True)
    def _conv2d_backward_nb(x, kernel, grad_out):  # pragma: no cover
        n, c_in, h, w = x.shape
        f = kernel.shape[0]
        grad_x = np.zeros((n, c_in, h, w))
        gk_part = np.zeros((n, f, c_in, 3, 3))
        for bn in prange(n):
            for bf in range(f):
                for i in range(h):
                    for j in range(w):
                        g = grad_out[bn, bf, i, j]
                        if g == 0.0:
                            continue
                        for bc in range(c_in):
                            for m in range(3):
                                ii = i + m - 1
                                if 0 <= ii < h:
                                    for v in range(3):
                                        jj = j + v - 1
                                        if 0 <= jj < w:
                                            grad_x[bn, bc, ii, jj] += g * kernel[bf, bc, m, v]
                                            gk_part[bn, bf, bc, m, v] += g * x[bn, bc, ii, jj]
        return grad_x, gk_part

    @numba.njit(cache=True, parallel=True)
    def _maxpool_forward_nb(x):  # pragma: no cover
        n, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        out = np.empty((n, c, h2, w2))
        idx = np.empty((n, c, h2, w2), dtype=np.int64)
        for bn in prange(n):
            for bc in range(c):
                for i in range(h2):
                    for j in range(w2):
                        best = x[bn, bc, 2 * i, 2 * j]
                        arg = 0
                        pos = 0
                        for m in range(2):
                            for v in range(2):
                                val = x[bn, bc, 2 * i + m, 2 * j + v]
                                if val > best:
                                    best = val
                                    arg = pos
                                pos += 1
                        out[bn, bc, i, j] = best
                        idx[bn, bc, i, j] = arg
        return out, idx

    @numba.njit(cache=True, parallel=True)
    def _maxpool_backward_nb(grad_out, idx, h, w):  # pragma: no cover
        n, c, h2, w2 = grad_out.shape
        grad_x = np.zeros((n, c, h, w))
        for bn in prange(n):
            for bc in range(c):
                for i in range(h2):
                    for j in range(w2):
                        a = idx[bn, bc, i, j]
                        grad_x[bn, bc, 2 * i + a // 2, 2 * j + a % 2] = grad_out[bn, bc, i, j]
        return grad_x

else:  # pragma: no cover
    _conv2d_forward_nb = None
    _conv2d_backward_nb = None
    _maxpool_forward_nb = None
    _maxpool_backward_nb = None


def _conv2d_backward_nb_wrap(x, kernel, grad_out):
    grad_x, gk_part = _conv2d_backward_nb(x, kernel, grad_out)
    return grad_x, gk_part.sum(axis=0)


conv2d_forward = backend.select(_conv2d_forward_np, _conv2d_forward_nb)
conv2d_backward = backend.select(
    _conv2d_backward_np,
    _conv2d_backward_nb_wrap if backend.HAS_NUMBA else None,
)
maxpool_forward = backend.select(_maxpool_forward_np, _maxpool_forward_nb)
maxpool_backward = backend.select(_maxpool_backward_np, _maxpool_backward_nb)
