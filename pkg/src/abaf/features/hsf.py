"""High-level statistical functions: the 6552-dimensional per-clip vector.

Layout is LLD-major, variant-middle, functional-minor:

    index(lld, variant, functional) = lld*3*39 + variant*39 + functional

with variants ("raw", "de", "dede") meaning the contour itself, its regression
delta, and the delta applied twice.  Feature names follow the same order as
``<lld>_<variant>_<functional>``.
"""

from __future__ import annotations

import numpy as np

from abaf.features.functionals import (
    FUNCTIONAL_NAMES,
    N_FUNCTIONALS,
    apply_functionals,
    delta,
)
from abaf.features.llds import LLD_NAMES, N_LLDS, LldConfig, compute_llds
from abaf.stats import welch_t_columns
from abaf.types import HsfVector

VARIANTS: tuple[str, ...] = ("raw", "de", "dede")

HSF_DIM = N_LLDS * len(VARIANTS) * N_FUNCTIONALS


def hsf_feature_names() -> tuple[str, ...]:
    return tuple(
        f"{lld}_{variant}_{functional}"
        for lld in LLD_NAMES
        for variant in VARIANTS
        for functional in FUNCTIONAL_NAMES
    )


_HSF_NAMES = hsf_feature_names()
assert HSF_DIM == 6552 == len(_HSF_NAMES)


def assemble_hsf(
    x: np.ndarray, sample_rate: int, cfg: LldConfig | None = None
) -> HsfVector:
    """56 LLDs x {raw, delta, delta-delta} x 39 functionals for one clip."""
    llds, _ = compute_llds(x, sample_rate, cfg)
    variants = (llds, delta(llds, 1), delta(llds, 2))
    values = np.empty(HSF_DIM, dtype=np.float64)
    pos = 0
    for lld_idx in range(N_LLDS):
        for var in variants:
            values[pos : pos + N_FUNCTIONALS] = apply_functionals(var[lld_idx])
            pos += N_FUNCTIONALS
    return HsfVector(values=values, names=_HSF_NAMES)


def select_top_k(hsf_matrix: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k columns with largest |Welch t| between the two classes.

    Ties break toward the lower column index.  Fit this on training rows only;
    the returned index array is then applied unchanged to validation/test rows.
    """
    x = np.asarray(hsf_matrix, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError(f"hsf_matrix must be 2-D, got shape {x.shape}")
    if not 1 <= k <= x.shape[1]:
        raise ValueError(f"k must be in [1, {x.shape[1]}], got {k}")
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"need exactly two classes, got {classes.tolist()}")
    t, _, _ = welch_t_columns(x[y == classes[1]], x[y == classes[0]])
    score = np.abs(t)
    score[np.isnan(score)] = 0.0
    return np.argsort(-score, kind="stable")[:k]
