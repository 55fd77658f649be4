"""Interpretability stack over HSF features.

Welch two-sample tests per column, Benjamini-Hochberg correction across all
columns, a q-value (or raw-p) significance filter, and random-forest Gini
importance for ordering the survivors.  The report CSV mirrors the layout
FeatureName, t, FDR, RF_Score, Category.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from abaf.features.hsf import HSF_DIM, hsf_feature_names
from abaf.forest import RfConfig, random_forest_fit, rf_importance
from abaf.stats import bh_fdr, welch_t_columns, welch_t_test

__all__ = [
    "TTestResult",
    "bh_fdr",
    "emit_feature_report",
    "feature_category",
    "rank_significant_features",
    "welch_t_columns",
    "welch_t_test",
]

_CATEGORY_PREFIXES = (
    ("mfcc", "MFCC"),
    ("melspec", "Mel Spec"),
    ("zcr", "Envelope"),
    ("spectralRollOff", "Energy Spec"),
    ("spectralFlux", "Energy Spec"),
    ("spectralCentroid", "Energy Spec"),
    ("spectralMaxPos", "Energy Spec"),
    ("spectralMinPos", "Energy Spec"),
    ("fband", "Energy Spec"),
    ("logenergy", "Prosodic"),
    ("F0", "Prosodic"),
    ("voiceProb", "Voicing"),
)


@dataclass(frozen=True)
class TTestResult:
    feature_name: str
    t_stat: float
    p_value: float
    q_value: float
    rf_score: float


def feature_category(feature_name: str) -> str:
    """Report category from the LLD prefix of an HSF feature name.

    Names outside the HSF layout (e.g. synthetic columns) fall into "Other".
    """
    for prefix, category in _CATEGORY_PREFIXES:
        if feature_name.startswith(prefix):
            return category
    return "Other"


def rank_significant_features(
    hsf_matrix: np.ndarray,
    labels,
    alpha: float = 0.01,
    feature_names: list[str] | None = None,
    filter_on: str = "q",
    rf_cfg: RfConfig | None = None,
) -> list[TTestResult]:
    """Features passing the significance filter, sorted by RF importance.

    filter_on selects the gated statistic: "q" keeps q < alpha after BH
    correction over all columns, "p" keeps the uncorrected p < alpha.
    """
    x = np.asarray(hsf_matrix, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError(f"expected (n, d) matrix for {y.size} labels, got {x.shape}")
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"labels must contain exactly two classes, got {classes}")
    if filter_on not in ("q", "p"):
        raise ValueError(f"filter_on must be 'q' or 'p', got {filter_on!r}")
    if feature_names is None:
        if x.shape[1] == HSF_DIM:
            feature_names = hsf_feature_names()
        else:
            feature_names = [f"col{i}" for i in range(x.shape[1])]
    if len(feature_names) != x.shape[1]:
        raise ValueError(f"{len(feature_names)} names for {x.shape[1]} columns")

    t, _, p = welch_t_columns(x[y == classes[1]], x[y == classes[0]])
    q = bh_fdr(p)
    gate = q if filter_on == "q" else p
    keep = np.flatnonzero(gate < alpha)

    forest = random_forest_fit(x, y, rf_cfg or RfConfig())
    imp = rf_importance(forest)

    rows = [
        TTestResult(
            feature_name=feature_names[j],
            t_stat=float(t[j]),
            p_value=float(p[j]),
            q_value=float(q[j]),
            rf_score=float(imp[j]),
        )
        for j in keep
    ]
    # Descending importance; name breaks exact ties deterministically.
    rows.sort(key=lambda r: (-r.rf_score, r.feature_name))
    return rows


def emit_feature_report(table: list[TTestResult], path) -> None:
    if not table:
        raise ValueError("empty feature report: no significant features to emit")
    lines = ["FeatureName,t,FDR,RF_Score,Category"]
    for r in table:
        lines.append(
            f"{r.feature_name},{r.t_stat:.12g},{r.q_value:.12g},"
            f"{r.rf_score:.12g},{feature_category(r.feature_name)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
