"""Experiment reports: per-fold rows, aggregate rows, CSV/JSON/SVG writers.

Everything written here is byte-deterministic for a fixed (corpus, config,
seed) triple except the JSON `started_at` field, which is the single place a
wall-clock timestamp may appear.  Floats are formatted with %.12g; absent
values (e.g. single-class AUCs) render as empty CSV cells and JSON nulls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from abaf.harness.metrics import pr_curve_points, roc_curve_points
from abaf.types import Metrics

METRIC_COLUMNS = (
    "acc",
    "precision",
    "recall",
    "f1",
    "macro_avg_f1",
    "weighted_avg_f1",
    "roc_auc",
    "pr_auc",
)


@dataclass
class FoldResult:
    fold: int
    metrics: Metrics
    # Held-out scores kept for plotting and threshold re-analysis; these are
    # never serialized into the JSON summary.
    y_true: np.ndarray | None = None
    y_score: np.ndarray | None = None
    stream_metrics: dict[str, Metrics] = field(default_factory=dict)
    val_metrics: dict[str, Metrics] = field(default_factory=dict)
    wam_weights: dict[str, float] = field(default_factory=dict)


@dataclass
class ExperimentReport:
    name: str
    seed: int
    config: dict[str, str]
    folds: list[FoldResult]
    started_at: str = ""

    def aggregate(self) -> dict[str, tuple[float | None, float | None]]:
        """column -> (mean, population std) over folds; None when all absent."""
        out: dict[str, tuple[float | None, float | None]] = {}
        for col in METRIC_COLUMNS:
            vals = [getattr(f.metrics, col) for f in self.folds]
            present = np.array([v for v in vals if v is not None], dtype=np.float64)
            if present.size == 0:
                out[col] = (None, None)
            else:
                out[col] = (float(present.mean()), float(present.std(ddof=0)))
        return out


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.12g}"


def write_csv(report: ExperimentReport, path) -> None:
    """Per-fold rows, then `mean` and `std` aggregate rows."""
    streams = sorted({s for f in report.folds for s in f.stream_metrics})
    header = ["fold", *METRIC_COLUMNS]
    for s in streams:
        header += [f"{s}_acc", f"{s}_roc_auc", f"w_{s}"]

    lines = [",".join(header)]
    for f in report.folds:
        row = [str(f.fold)] + [_fmt(getattr(f.metrics, c)) for c in METRIC_COLUMNS]
        for s in streams:
            m = f.stream_metrics.get(s)
            row += [
                _fmt(m.acc if m else None),
                _fmt(m.roc_auc if m else None),
                _fmt(f.wam_weights.get(s)),
            ]
        lines.append(",".join(row))

    agg = report.aggregate()
    for which in ("mean", "std"):
        pick = 0 if which == "mean" else 1
        row = [which] + [_fmt(agg[c][pick]) for c in METRIC_COLUMNS]
        row += [""] * (3 * len(streams))
        lines.append(",".join(row))

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def metrics_to_dict(m: Metrics) -> dict:
    d = {c: getattr(m, c) for c in METRIC_COLUMNS}
    d["confusion"] = m.confusion.tolist()
    d["flags"] = list(m.flags)
    return d


def write_json(report: ExperimentReport, path) -> None:
    agg = report.aggregate()
    doc = {
        "name": report.name,
        "seed": report.seed,
        "started_at": report.started_at,
        "config": dict(sorted(report.config.items())),
        "folds": [
            {
                "fold": f.fold,
                "metrics": metrics_to_dict(f.metrics),
                "stream_metrics": {
                    s: metrics_to_dict(m) for s, m in sorted(f.stream_metrics.items())
                },
                "val_metrics": {
                    s: metrics_to_dict(m) for s, m in sorted(f.val_metrics.items())
                },
                "wam_weights": dict(sorted(f.wam_weights.items())),
            }
            for f in report.folds
        ],
        "aggregate": {
            c: {"mean": agg[c][0], "std": agg[c][1]} for c in METRIC_COLUMNS
        },
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# --- SVG plotting -----------------------------------------------------------
# Plots are self-contained hand-assembled SVG: a fixed 480x480 canvas with a
# 400x400 plot area, one polyline per fold, and a dashed chance diagonal.

_SVG_HEAD = (
    '<svg xmlns="http://www.w3.org/2000/svg" width="480" height="480" '
    'viewBox="0 0 480 480">\n'
    '<rect width="480" height="480" fill="white"/>\n'
)
_PALETTE = ("#1b6ca8", "#c1403d", "#2e8b57", "#8950a8", "#b8860b",
            "#3b3b3b", "#1f9e9e", "#a0522d")


def _px(x: float, y: float) -> tuple[float, float]:
    # plot area: x in [60, 460], y in [20, 420], y axis points up
    return 60.0 + 400.0 * x, 420.0 - 400.0 * y


def _axes(title: str, xlabel: str, ylabel: str) -> list[str]:
    parts = [
        '<rect x="60" y="20" width="400" height="400" fill="none" '
        'stroke="#444" stroke-width="1"/>',
        f'<text x="260" y="14" font-family="sans-serif" font-size="14" '
        f'text-anchor="middle">{title}</text>',
        f'<text x="260" y="452" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="220" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 220)">{ylabel}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        x, y = _px(frac, 0.0)
        parts.append(
            f'<text x="{x:.1f}" y="436" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{frac:g}</text>'
        )
        x, y = _px(0.0, frac)
        parts.append(
            f'<text x="52" y="{y + 3:.1f}" font-family="sans-serif" '
            f'font-size="10" text-anchor="end">{frac:g}</text>'
        )
    return parts


def _polyline(xs: np.ndarray, ys: np.ndarray, color: str) -> str:
    pts = " ".join(
        f"{px:.2f},{py:.2f}" for px, py in (_px(x, y) for x, y in zip(xs, ys))
    )
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" '
        'stroke-width="1.5"/>'
    )


def _curve_svg(report: ExperimentReport, kind: str) -> str:
    if kind == "roc":
        parts = _axes("ROC per fold", "false positive rate", "true positive rate")
        x0, y0 = _px(0, 0)
        x1, y1 = _px(1, 1)
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x1:.1f}" y2="{y1:.1f}" '
            'stroke="#999" stroke-dasharray="5,4" stroke-width="1"/>'
        )
    else:
        parts = _axes("Precision-recall per fold", "recall", "precision")
    for f in report.folds:
        if f.y_true is None or f.y_score is None:
            continue
        if f.y_true.min() == f.y_true.max():
            continue  # curve undefined on a single-class fold
        if kind == "roc":
            xs, ys = roc_curve_points(f.y_true, f.y_score)
        else:
            xs, ys = pr_curve_points(f.y_true, f.y_score)
        color = _PALETTE[(f.fold - 1) % len(_PALETTE)]
        parts.append(_polyline(xs, ys, color))
        lx, ly = _px(1.04, 1.0)
        parts.append(
            f'<text x="{462}" y="{26 + 14 * ((f.fold - 1) % len(_PALETTE))}" '
            f'font-family="sans-serif" font-size="10" fill="{color}">'
            f"f{f.fold}</text>"
        )
    return _SVG_HEAD + "\n".join(parts) + "\n</svg>\n"


def _confusion_svg(report: ExperimentReport) -> str:
    total = np.zeros((2, 2), dtype=np.int64)
    for f in report.folds:
        total += f.metrics.confusion
    peak = max(int(total.max()), 1)
    parts = _axes("Confusion (summed over folds)", "predicted", "true")
    labels = ("0", "1")
    for i in range(2):  # true
        for j in range(2):  # predicted
            x = 60 + 200 * j
            y = 20 + 200 * i
            frac = total[i, j] / peak
            # light blue -> saturated blue ramp
            r = int(237 - 180 * frac)
            g = int(244 - 130 * frac)
            b = int(250 - 80 * frac)
            parts.append(
                f'<rect x="{x}" y="{y}" width="200" height="200" '
                f'fill="rgb({r},{g},{b})" stroke="#444"/>'
            )
            tcol = "#000" if frac < 0.6 else "#fff"
            parts.append(
                f'<text x="{x + 100}" y="{y + 106}" font-family="sans-serif" '
                f'font-size="22" text-anchor="middle" fill="{tcol}">'
                f"{int(total[i, j])}</text>"
            )
    for j, lab in enumerate(labels):
        parts.append(
            f'<text x="{160 + 200 * j}" y="436" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{lab}</text>'
        )
        parts.append(
            f'<text x="50" y="{124 + 200 * j}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end">{lab}</text>'
        )
    return _SVG_HEAD + "\n".join(parts) + "\n</svg>\n"


def write_plots(report: ExperimentReport, out_dir) -> list[Path]:
    """Write roc.svg, pr.svg, confusion.svg into out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, svg in (
        ("roc.svg", _curve_svg(report, "roc")),
        ("pr.svg", _curve_svg(report, "pr")),
        ("confusion.svg", _confusion_svg(report)),
    ):
        p = out / name
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written
