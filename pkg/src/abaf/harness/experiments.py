"""End-to-end experiment drivers: single-stream, fusion, ablation, subtype.

Protocol per fold (shared by every driver):

  1. stratified k-fold over subjects; within each fold, 20% of the training
     subjects (stratified) become the early-stopping validation split;
  2. HSF column selection and z-score standardization are fit on the training
     split only, then applied unchanged to validation and test rows;
  3. one sub-model per stream is pre-trained; its validation metrics feed the
     weighted-aggregation scores unless fixed weights are supplied;
  4. sub-models are frozen, embeddings extracted, tokens fused, and the fusion
     head trained on the same train/val split (a fine-tune-all switch instead
     backpropagates through the sub-models jointly);
  5. the held-out fold is touched exactly once, for final metrics.

Split disjointness is re-checked at runtime; every random draw comes from a
named stream of the experiment seed, so a rerun with identical inputs and
seed reproduces every artifact byte for byte.
"""

from __future__ import annotations

import dataclasses
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from abaf import rng as rng_mod
from abaf.config import PipelineConfig, to_flat
from abaf.corpus.cache import FeatureBundle
from abaf.features.hsf import select_top_k
from abaf.harness.folds import downsample_balance, split_train_val, stratified_kfold
from abaf.harness.metrics import compute_metrics
from abaf.harness.report import ExperimentReport, FoldResult
from abaf.harness.training import (
    TrainConfig,
    compute_embeddings,
    predict_scores,
    train_model,
)
from abaf.models import (
    STREAM_ORDER,
    FusionModel,
    ImageModel,
    NumModel,
    WAM_PRESETS,
    fusion_config_from,
    image_config_from,
    late_fuse,
    num_config_from,
    wam_score,
    wam_weights,
)
from abaf.nn import Module, ModuleList, save_checkpoint

_STREAM_ATTR = {
    "envelope": "envelope_image",
    "spectrogram": "spectrogram_image",
    "mel": "mel_image",
}


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _stack_stream(bundles: list[FeatureBundle], stream: str) -> np.ndarray:
    if stream == "hsf":
        return np.stack([b.hsf for b in bundles])
    return np.stack([getattr(b, _STREAM_ATTR[stream]) for b in bundles])


def _train_cfg(cfg: PipelineConfig) -> TrainConfig:
    return TrainConfig(
        max_epochs=cfg.train.max_epochs,
        patience=cfg.train.patience,
        batch_size=cfg.train.batch_size,
        lr=cfg.train.lr,
    )


def _assert_no_leakage(tr: np.ndarray, va: np.ndarray, te: np.ndarray, n: int) -> None:
    joined = np.concatenate([tr, va, te])
    if np.unique(joined).size != joined.size:
        raise RuntimeError("split leakage: train/val/test index sets overlap")
    if joined.size != n:
        raise RuntimeError(f"splits cover {joined.size} of {n} subjects")


class _HsfTransform:
    """Fold-local top-k column selection + z-score, fit on training rows only."""

    def __init__(self, hsf_tr: np.ndarray, y_tr: np.ndarray, k: int):
        self.columns = select_top_k(hsf_tr, y_tr, k)
        picked = hsf_tr[:, self.columns]
        self.mean = picked.mean(axis=0)
        sigma = picked.std(axis=0, ddof=0)
        sigma[sigma < 1e-12] = 1.0  # constant columns pass through centered
        self.sigma = sigma

    def apply(self, hsf: np.ndarray) -> np.ndarray:
        return (hsf[:, self.columns] - self.mean) / self.sigma


def _build_submodel(stream: str, cfg: PipelineConfig, seed: int, name: str):
    init = rng_mod.stream(seed, f"{name}/init")
    if stream == "hsf":
        return NumModel(num_config_from(cfg), init)
    return ImageModel(image_config_from(cfg), init)


class _MultiStream:
    """Tuple of per-stream arrays indexable as one dataset (for joint training)."""

    def __init__(self, arrays: tuple[np.ndarray, ...]):
        self.arrays = arrays
        self.shape = (arrays[0].shape[0],)

    def __getitem__(self, idx) -> "_MultiStream":
        return _MultiStream(tuple(a[idx] for a in self.arrays))


class _JointFusion(Module):
    """Sub-models + fusion head trained end to end (fine-tune-all path)."""

    def __init__(self, submodels: list, weights: np.ndarray, fusion: FusionModel):
        super().__init__()
        self.subs = ModuleList(submodels)
        self.fusion = fusion
        self.weights = weights

    def forward(self, ms: _MultiStream) -> np.ndarray:
        embeddings = [m.forward(x)[1] for m, x in zip(self.subs, ms.arrays)]
        return self.fusion.forward(late_fuse(embeddings, self.weights))

    def backward(self, grad_logits: np.ndarray) -> None:
        g_tokens = self.fusion.backward(grad_logits)
        for j, m in enumerate(self.subs):
            m.backward_from_embedding(g_tokens[:, j, :] * self.weights[j])
        return None


def run_single_feature_experiment(
    bundles: list[FeatureBundle],
    labels,
    feature_kind: str,
    cfg: PipelineConfig,
    seed: int,
    k: int = 5,
    name: str | None = None,
    out_dir=None,
) -> ExperimentReport:
    """k-fold evaluation of one stream's sub-model alone."""
    if feature_kind not in STREAM_ORDER:
        raise ValueError(f"unknown feature kind {feature_kind!r}")
    name = name or f"single/{feature_kind}"
    y = np.asarray(labels).astype(np.int64).ravel()
    if len(bundles) != y.size:
        raise ValueError("bundles and labels disagree in length")
    x_all = _stack_stream(bundles, feature_kind)
    tc = _train_cfg(cfg)
    folds = []
    for i, plan in enumerate(stratified_kfold(y, k, seed, name=f"{name}/kfold"), 1):
        tr_pos, va_pos = split_train_val(
            y[plan.train_idx], cfg.train.val_frac, seed, name=f"{name}/fold{i}/val"
        )
        tr, va, te = plan.train_idx[tr_pos], plan.train_idx[va_pos], plan.test_idx
        _assert_no_leakage(tr, va, te, y.size)

        if feature_kind == "hsf":
            xf = _HsfTransform(x_all[tr], y[tr], cfg.model.num_top_k)
            x_tr, x_va, x_te = xf.apply(x_all[tr]), xf.apply(x_all[va]), xf.apply(x_all[te])
        else:
            x_tr, x_va, x_te = x_all[tr], x_all[va], x_all[te]

        model = _build_submodel(feature_kind, cfg, seed, f"{name}/fold{i}/{feature_kind}")
        train_model(model, x_tr, y[tr], x_va, y[va], tc, seed,
                    name=f"{name}/fold{i}/{feature_kind}")
        scores = predict_scores(model, x_te)
        folds.append(FoldResult(
            fold=i,
            metrics=compute_metrics(y[te], scores),
            y_true=y[te].copy(),
            y_score=scores,
        ))
        if out_dir is not None:
            fold_dir = Path(out_dir) / f"fold{i}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(model, fold_dir / f"{feature_kind}.ckpt")
    return ExperimentReport(name=name, seed=seed, config=to_flat(cfg),
                            folds=folds, started_at=_now_iso())


def run_fusion_experiment(
    bundles: list[FeatureBundle],
    labels,
    cfg: PipelineConfig,
    seed: int,
    k: int = 5,
    streams: tuple[str, ...] = STREAM_ORDER,
    fixed_weights=None,
    name: str = "fusion",
    out_dir=None,
) -> ExperimentReport:
    """k-fold two-stage fusion; per-stream test metrics ride along per fold.

    fixed_weights, when given (one weight per stream), bypasses the
    validation-metric aggregation; ablation uses 1/3 for each kept stream.
    """
    for s in streams:
        if s not in STREAM_ORDER:
            raise ValueError(f"unknown stream {s!r}")
    if fixed_weights is not None and len(fixed_weights) != len(streams):
        raise ValueError(f"{len(fixed_weights)} weights for {len(streams)} streams")
    y = np.asarray(labels).astype(np.int64).ravel()
    if len(bundles) != y.size:
        raise ValueError("bundles and labels disagree in length")

    data = {s: _stack_stream(bundles, s) for s in streams}
    tc = _train_cfg(cfg)
    preset = WAM_PRESETS[cfg.model.wam_preset]
    folds = []
    for i, plan in enumerate(stratified_kfold(y, k, seed, name=f"{name}/kfold"), 1):
        tr_pos, va_pos = split_train_val(
            y[plan.train_idx], cfg.train.val_frac, seed, name=f"{name}/fold{i}/val"
        )
        tr, va, te = plan.train_idx[tr_pos], plan.train_idx[va_pos], plan.test_idx
        _assert_no_leakage(tr, va, te, y.size)

        split = {}
        for s in streams:
            if s == "hsf":
                xf = _HsfTransform(data[s][tr], y[tr], cfg.model.num_top_k)
                split[s] = (xf.apply(data[s][tr]), xf.apply(data[s][va]),
                            xf.apply(data[s][te]))
            else:
                split[s] = (data[s][tr], data[s][va], data[s][te])

        # Stage 1: per-stream sub-models, validation metrics, stream weights.
        models = {}
        val_metrics = {}
        for s in streams:
            x_tr, x_va, _ = split[s]
            m = _build_submodel(s, cfg, seed, f"{name}/fold{i}/{s}")
            train_model(m, x_tr, y[tr], x_va, y[va], tc, seed,
                        name=f"{name}/fold{i}/{s}")
            models[s] = m
            val_metrics[s] = compute_metrics(y[va], predict_scores(m, x_va))

        if fixed_weights is not None:
            weights = np.asarray(fixed_weights, dtype=np.float64)
        else:
            weights = wam_weights([wam_score(val_metrics[s], preset) for s in streams])

        # Stage 2: fused tokens from frozen sub-models, fusion head on top.
        fusion_cfg = dataclasses.replace(fusion_config_from(cfg), n_streams=len(streams))
        fusion = FusionModel(fusion_cfg, rng_mod.stream(seed, f"{name}/fold{i}/fusion/init"))

        if cfg.train.fine_tune_all:
            joint = _JointFusion([models[s] for s in streams], weights, fusion)
            ms_tr = _MultiStream(tuple(split[s][0] for s in streams))
            ms_va = _MultiStream(tuple(split[s][1] for s in streams))
            ms_te = _MultiStream(tuple(split[s][2] for s in streams))
            train_model(joint, ms_tr, y[tr], ms_va, y[va], tc, seed,
                        name=f"{name}/fold{i}/fusion")
            test_scores = predict_scores(joint, ms_te)
        else:
            tokens = {}
            for part in range(3):
                embeddings = [
                    compute_embeddings(models[s], split[s][part]) for s in streams
                ]
                tokens[part] = late_fuse(embeddings, weights)
            train_model(fusion, tokens[0], y[tr], tokens[1], y[va], tc, seed,
                        name=f"{name}/fold{i}/fusion")
            test_scores = predict_scores(fusion, tokens[2])

        stream_metrics = {
            s: compute_metrics(y[te], predict_scores(models[s], split[s][2]))
            for s in streams
        }
        folds.append(FoldResult(
            fold=i,
            metrics=compute_metrics(y[te], test_scores),
            y_true=y[te].copy(),
            y_score=test_scores,
            stream_metrics=stream_metrics,
            val_metrics=val_metrics,
            wam_weights={s: float(w) for s, w in zip(streams, weights)},
        ))
        if out_dir is not None:
            fold_dir = Path(out_dir) / f"fold{i}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            for s in streams:
                save_checkpoint(models[s], fold_dir / f"{s}.ckpt")
            save_checkpoint(fusion, fold_dir / "fusion.ckpt")
    return ExperimentReport(name=name, seed=seed, config=to_flat(cfg),
                            folds=folds, started_at=_now_iso())


def run_ablation(
    bundles: list[FeatureBundle],
    labels,
    cfg: PipelineConfig,
    seed: int,
    k: int = 5,
    exclude: str | None = None,
    name: str = "ablation",
    out_dir=None,
) -> dict[str, ExperimentReport]:
    """Leave-one-stream-out fusion; kept streams weighted 1/3 each.

    exclude limits the sweep to a single left-out stream; the default runs
    all four exclusions.
    """
    targets = list(STREAM_ORDER) if exclude is None else [exclude]
    reports = {}
    for left_out in targets:
        if left_out not in STREAM_ORDER:
            raise ValueError(f"unknown stream {left_out!r}")
        kept = tuple(s for s in STREAM_ORDER if s != left_out)
        sub_out = None if out_dir is None else Path(out_dir) / f"no_{left_out}"
        reports[left_out] = run_fusion_experiment(
            bundles, labels, cfg, seed, k=k,
            streams=kept,
            fixed_weights=[1.0 / len(kept)] * len(kept),
            name=f"{name}/no_{left_out}",
            out_dir=sub_out,
        )
    return reports


def label_by_threshold(scores, t: float) -> np.ndarray:
    """1 where scale score >= t, else 0."""
    return (np.asarray(scores, dtype=np.float64) >= t).astype(np.int64)


def run_threshold_sweep(
    bundles: list[FeatureBundle],
    scale_scores,
    thresholds,
    cfg: PipelineConfig,
    seed: int,
    k: int = 5,
    name: str = "sweep",
) -> dict[float, ExperimentReport]:
    """Fusion experiment per labeling threshold over the raw scale scores."""
    scores = np.asarray(scale_scores, dtype=np.float64).ravel()
    if len(bundles) != scores.size:
        raise ValueError("bundles and scale scores disagree in length")
    reports = {}
    for t in thresholds:
        y = label_by_threshold(scores, t)
        counts = np.bincount(y, minlength=2)
        if counts.min() < k:
            raise ValueError(
                f"threshold {t:g} leaves class counts {counts.tolist()}; "
                f"each class needs >= k={k} subjects"
            )
        reports[float(t)] = run_fusion_experiment(
            bundles, y, cfg, seed, k=k, name=f"{name}/t{t:g}"
        )
    return reports


def run_subtype_tasks(
    bundles: list[FeatureBundle],
    scale_scores,
    bands,
    cfg: PipelineConfig,
    seed: int,
    repeats: int = 10,
    k: int = 5,
    pairs=None,
    name: str = "subtype",
) -> dict[str, list[ExperimentReport]]:
    """Pairwise severity-band classification, downsampled and repeated.

    Subjects are binned by the band table; for every ordered band pair the
    lower band is class 0.  Each repeat re-draws the balancing subset, runs
    the full fusion pipeline, and the caller averages over repeats.
    """
    scores = np.asarray(scale_scores, dtype=np.float64).ravel()
    if len(bundles) != scores.size:
        raise ValueError("bundles and scale scores disagree in length")
    band_names = [b[2] for b in bands]

    def _bin(score: float) -> str:
        for lo, hi, label in bands:
            if lo <= score <= hi:
                return label
        raise ValueError(f"scale score {score:g} falls outside every band")

    assigned = np.array([_bin(s) for s in scores])
    members = {b: np.flatnonzero(assigned == b) for b in band_names}

    if pairs is None:
        pairs = [
            (band_names[i], band_names[j])
            for i in range(len(band_names))
            for j in range(i + 1, len(band_names))
        ]
    used = sorted({b for pair in pairs for b in pair}, key=band_names.index)
    empty = [b for b in used if members[b].size == 0]
    if empty:
        raise ValueError(f"empty severity bands after binning: {empty}")
    out: dict[str, list[ExperimentReport]] = {}
    for a, b in pairs:
        pair_idx = np.concatenate([members[a], members[b]])
        pair_y = np.concatenate([
            np.zeros(members[a].size, dtype=np.int64),
            np.ones(members[b].size, dtype=np.int64),
        ])
        key = f"{a}_vs_{b}"
        runs = []
        for rep in range(repeats):
            keep = downsample_balance(pair_y, seed, name=f"{name}/{key}/rep{rep}")
            sel = pair_idx[keep]
            runs.append(run_fusion_experiment(
                [bundles[j] for j in sel], pair_y[keep], cfg, seed, k=k,
                name=f"{name}/{key}/rep{rep}",
            ))
        out[key] = runs
    return out


def aggregate_repeats(reports: list[ExperimentReport]) -> dict[str, tuple[float | None, float | None]]:
    """column -> (mean of per-repeat fold means, std over repeats, ddof=0)."""
    from abaf.harness.report import METRIC_COLUMNS

    out = {}
    for col in METRIC_COLUMNS:
        means = [r.aggregate()[col][0] for r in reports]
        present = np.array([m for m in means if m is not None], dtype=np.float64)
        if present.size == 0:
            out[col] = (None, None)
        else:
            out[col] = (float(present.mean()), float(present.std(ddof=0)))
    return out
