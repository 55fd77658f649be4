"""Two-sample statistics: Welch tests, incomplete beta, BH false-discovery rates.

The regularized incomplete beta function is evaluated in-package (Lentz
continued fraction) so the p-value path has no SciPy dependency; external
implementations appear only as oracles in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

_BETA_EPS = 3e-14
_BETA_TINY = 1e-300
_BETA_MAX_ITER = 300


def _betacf(a: float, b: float, x: float) -> float:
    """Lentz evaluation of the continued fraction for betainc."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_TINY:
        d = _BETA_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise RuntimeError(f"betainc continued fraction failed for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"betainc needs a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"betainc needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Continued fraction converges fast only on one side of the mean; mirror.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p for a t statistic: I_{df/(df+t^2)}(df/2, 1/2)."""
    if df <= 0.0:
        raise ValueError(f"df must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def welch_t_columns(
    a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise Welch t, Welch-Satterthwaite df, and two-sided p.

    a and b are (n_a, d) and (n_b, d).  Columns where both group variances
    vanish get t = +-inf / p = 0 when the means differ (a perfect separator)
    and t = 0 / p = 1 when they agree; df is set to 1 there as a placeholder.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ValueError(f"need >= 2 rows per group, got {na} and {nb}")
    va = a.var(axis=0, ddof=1) / na
    vb = b.var(axis=0, ddof=1) / nb
    diff = a.mean(axis=0) - b.mean(axis=0)
    denom_sq = va + vb
    degenerate = denom_sq == 0.0

    t = np.zeros_like(diff)
    ok = ~degenerate
    t[ok] = diff[ok] / np.sqrt(denom_sq[ok])
    t[degenerate & (diff > 0.0)] = np.inf
    t[degenerate & (diff < 0.0)] = -np.inf

    df = np.ones_like(diff)
    df_num = denom_sq[ok] ** 2
    df_den = va[ok] ** 2 / (na - 1) + vb[ok] ** 2 / (nb - 1)
    df[ok] = df_num / df_den

    p = np.array([t_sf_two_sided(float(ti), float(di)) for ti, di in zip(t, df)])
    return t, df, p


def welch_t_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Welch's unequal-variance t-test on two 1-D samples; returns (t, p)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise ValueError(f"need >= 2 samples per group, got {a.size} and {b.size}")
    if a.var(ddof=1) == 0.0 or b.var(ddof=1) == 0.0:
        raise ValueError("each sample must have nonzero variance")
    t, _, p = welch_t_columns(a[:, None], b[:, None])
    return float(t[0]), float(p[0])


def bh_fdr(p_values: np.ndarray) -> np.ndarray:
    """Benjamini-Hochberg adjusted q-values, same order as the input."""
    p = np.asarray(p_values, dtype=np.float64).ravel()
    if p.size == 0:
        return p.copy()
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    q_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    q = np.empty_like(q_sorted)
    q[order] = q_sorted
    return q
