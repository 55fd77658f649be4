"""Image-shaped feature inputs: envelope area plots and resized spectrograms.

All images are (C, H, W) float64 in [0, 1].  A degenerate feature (every value
equal) maps to an all-0.5 image so downstream normalisation never divides by
zero; this convention is relied on by tests.
"""

from __future__ import annotations

import numpy as np

from abaf.types import Contour, FeatureImage, SpectroMatrix


def upper_envelope(x: np.ndarray, sample_rate: int, lp_len_ms: float = 20.0) -> Contour:
    """|x| smoothed by a unit-sum moving average of round(sr*ms/1000) taps."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("clip is empty")
    if lp_len_ms <= 0.0:
        raise ValueError(f"lp_len_ms must be positive, got {lp_len_ms}")
    k_len = max(1, int(round(sample_rate * lp_len_ms / 1000.0)))
    kernel = np.full(k_len, 1.0 / k_len)
    return Contour(np.convolve(np.abs(x), kernel, mode="same"), float(sample_rate))


def bilinear_resize(m: np.ndarray, h: int, w: int) -> np.ndarray:
    """Align-corners bilinear resampling of a 2-D matrix to (h, w)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {m.shape}")
    if h < 1 or w < 1:
        raise ValueError(f"target size must be >= 1, got ({h}, {w})")
    h0, w0 = m.shape
    ys = np.arange(h) * ((h0 - 1) / (h - 1)) if h > 1 else np.zeros(h)
    xs = np.arange(w) * ((w0 - 1) / (w - 1)) if w > 1 else np.zeros(w)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h0 - 1)
    x1 = np.minimum(x0 + 1, w0 - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = m[np.ix_(y0, x0)] * (1.0 - fx) + m[np.ix_(y0, x1)] * fx
    bot = m[np.ix_(y1, x0)] * (1.0 - fx) + m[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def _normalize_unit(v: np.ndarray) -> np.ndarray | None:
    """Min-max to [0, 1]; None signals the degenerate all-equal case."""
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return None
    return (v - lo) / (hi - lo)


def _envelope_grid(contour: Contour, h: int, w: int) -> np.ndarray:
    values = np.asarray(contour.values, dtype=np.float64)
    unit = _normalize_unit(values)
    if unit is None:
        return np.full((h, w), 0.5)
    n = unit.size
    t = np.arange(w) * ((n - 1) / (w - 1)) if w > 1 else np.zeros(w)
    heights = np.interp(t, np.arange(n), unit)
    filled = np.floor(heights * h + 0.5).astype(np.intp)
    grid = np.zeros((h, w))
    # Column j is painted bottom-up: rows h-filled .. h-1.
    rows = np.arange(h)[:, None]
    grid[rows >= (h - filled)[None, :]] = 1.0
    return grid


def rasterize(
    feature: Contour | SpectroMatrix, h: int, w: int, channels: int = 1
) -> FeatureImage:
    """Normalize a contour or matrix to [0, 1] and paint it onto (C, h, w)."""
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    if isinstance(feature, Contour):
        grid = _envelope_grid(feature, h, w)
        kind = "envelope"
    elif isinstance(feature, SpectroMatrix):
        unit = _normalize_unit(feature.data)
        grid = np.full((h, w), 0.5) if unit is None else bilinear_resize(unit, h, w)
        kind = "spectrogram" if feature.bin_axis == "linear_hz" else "mel"
    else:
        raise TypeError(f"cannot rasterize {type(feature).__name__}")
    pixels = np.broadcast_to(grid, (channels, h, w)).copy()
    return FeatureImage(pixels=pixels, kind=kind)
