"""Contour statistics ("functionals") and delta regression.

A functional maps one low-level-descriptor contour to one scalar.  The 39
functionals below are applied in the fixed ``FUNCTIONAL_NAMES`` order to every
contour; downstream feature vectors rely on that ordering, so it must never be
reshuffled.

Conventions, chosen once and frozen:

* Positions (maxPos, minPos, peak distances, zcr) are normalised by n - 1 so a
  position of 1.0 means the final sample regardless of contour length.
* A peak is a strict interior local maximum that also exceeds the arithmetic
  mean.  Plateaus are not peaks.  With no peaks, peakMean and
  peakMeanMeanDist are 0.
* variance is the population variance (divides by n).  skewness and kurtosis
  (non-excess) are 0 for constant contours instead of NaN.
* nz* functionals run over nonzero samples only and return 0 when every sample
  is zero; nzgmean uses magnitudes so negative samples are legal.
* Regression time axis is normalised to [0, 1]; errA is mean absolute
  residual, errQ mean squared residual.
* Quartiles and percentiles use linear interpolation between order statistics.
"""

from __future__ import annotations

import numpy as np

FUNCTIONAL_NAMES: tuple[str, ...] = (
    "maxPos",
    "minPos",
    "numPeaks",
    "meanPeakDist",
    "peakMean",
    "peakMeanMeanDist",
    "range",
    "amean",
    "absmean",
    "qmean",
    "nzabsmean",
    "nzqmean",
    "nzgmean",
    "nnz",
    "quartile1",
    "quartile2",
    "quartile3",
    "iqr12",
    "iqr23",
    "iqr13",
    "percentile95",
    "percentile98",
    "centroid",
    "variance",
    "stddev",
    "skewness",
    "kurtosis",
    "zcr",
    "linregc1",
    "linregc2",
    "linregerrA",
    "linregerrQ",
    "qregc1",
    "qregc2",
    "qregc3",
    "qregerrA",
    "qregerrQ",
    "maxameandist",
    "minameandist",
)

N_FUNCTIONALS = len(FUNCTIONAL_NAMES)


def _peak_indices(c: np.ndarray, amean: float) -> np.ndarray:
    interior = (c[1:-1] > c[:-2]) & (c[1:-1] > c[2:]) & (c[1:-1] > amean)
    return np.flatnonzero(interior) + 1


def apply_functionals(contour: np.ndarray) -> np.ndarray:
    """All 39 functionals of one contour, in ``FUNCTIONAL_NAMES`` order."""
    c = np.asarray(contour, dtype=np.float64)
    if c.ndim != 1 or c.size < 3:
        raise ValueError(f"contour must be 1-D with >= 3 samples, got shape {c.shape}")
    n = c.size
    span = float(n - 1)
    out = np.empty(N_FUNCTIONALS, dtype=np.float64)

    amean = float(c.mean())
    cmax = float(c.max())
    cmin = float(c.min())
    out[0] = int(np.argmax(c)) / span
    out[1] = int(np.argmin(c)) / span

    peaks = _peak_indices(c, amean)
    out[2] = peaks.size
    out[3] = float(np.diff(peaks).mean()) / span if peaks.size >= 2 else 0.0
    peak_mean = float(c[peaks].mean()) if peaks.size else 0.0
    out[4] = peak_mean
    out[5] = peak_mean - amean if peaks.size else 0.0

    out[6] = cmax - cmin
    out[7] = amean
    out[8] = float(np.abs(c).mean())
    out[9] = float(np.sqrt(np.mean(c**2)))

    nz = c[c != 0.0]
    if nz.size:
        out[10] = float(np.abs(nz).mean())
        out[11] = float(np.sqrt(np.mean(nz**2)))
        out[12] = float(np.exp(np.mean(np.log(np.abs(nz)))))
    else:
        out[10] = out[11] = out[12] = 0.0
    out[13] = nz.size

    q1, q2, q3, p95, p98 = np.percentile(c, (25.0, 50.0, 75.0, 95.0, 98.0))
    out[14], out[15], out[16] = q1, q2, q3
    out[17] = q2 - q1
    out[18] = q3 - q2
    out[19] = q3 - q1
    out[20] = p95
    out[21] = p98

    t = np.linspace(0.0, 1.0, n)
    w = np.abs(c)
    wsum = float(w.sum())
    out[22] = float((t * w).sum()) / wsum if wsum > 0.0 else 0.0

    d = c - amean
    variance = float(np.mean(d**2))
    stddev = float(np.sqrt(variance))
    out[23] = variance
    out[24] = stddev
    if stddev > 0.0:
        # standardize before raising to powers; stddev**4 can underflow to
        # zero for tiny-but-nonzero contours even though the ratio is O(1)
        z = d / stddev
        out[25] = float(np.mean(z**3))
        out[26] = float(np.mean(z**4))
    else:
        out[25] = out[26] = 0.0

    out[27] = int(np.count_nonzero(d[:-1] * d[1:] < 0.0)) / span

    # Linear fit in closed form: slope = cov(t, c) / var(t).
    t_mean = float(t.mean())
    t_var = float(np.mean((t - t_mean) ** 2))
    cov = float(np.mean((t - t_mean) * d))
    c1 = cov / t_var
    c2 = amean - c1 * t_mean
    resid = c - (c1 * t + c2)
    out[28] = c1
    out[29] = c2
    out[30] = float(np.abs(resid).mean())
    out[31] = float(np.mean(resid**2))

    design = np.stack([t**2, t, np.ones(n)], axis=1)
    coef, *_ = np.linalg.lstsq(design, c, rcond=None)
    qresid = c - design @ coef
    out[32], out[33], out[34] = coef
    out[35] = float(np.abs(qresid).mean())
    out[36] = float(np.mean(qresid**2))

    out[37] = cmax - amean
    out[38] = amean - cmin
    return out


def delta(contours: np.ndarray, order: int = 1) -> np.ndarray:
    """Regression delta along time with +-2 frame context and edge replication.

    d(t) = sum_{k=1,2} k * (c(t+k) - c(t-k)) / (2 * (1^2 + 2^2)).  order=2
    applies the same operator twice.  Works on a single contour or a
    (n_llds, T) matrix; a linear ramp maps to its exact per-frame slope.
    """
    x = np.asarray(contours, dtype=np.float64)
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] < 5:
        raise ValueError(f"delta needs >= 5 frames, got {x.shape[1]}")
    for _ in range(order):
        padded = np.pad(x, ((0, 0), (2, 2)), mode="edge")
        x = (
            (padded[:, 3:-1] - padded[:, 1:-3]) + 2.0 * (padded[:, 4:] - padded[:, :-4])
        ) / 10.0
    return x[0] if squeeze else x
