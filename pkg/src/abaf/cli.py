"""Command-line surface: synth, extract, train, ablate, subtype, sweep, analyze.

Every subcommand takes --seed (default: ABAF_SEED env var, then 0) and
--config (flat `section.key = value` file).  Artifacts land under --out;
reruns with identical inputs, config, and seed reproduce them byte for byte,
timestamps excepted (confined to the JSON summary's started_at field).

Exit codes: 0 success; 1 missing/invalid input (message names the path);
2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from abaf.analysis import emit_feature_report, rank_significant_features
from abaf.config import (
    PipelineConfig,
    apply_overrides,
    extraction_hash,
    load_config,
    profile_config,
)
from abaf.corpus.manifest import (
    HAMD17_BANDS,
    PHQ9_BANDS,
    CorpusManifest,
    load_manifest,
)
from abaf.corpus.synth import SynthSpec, generate_synthetic_corpus
from abaf.errors import AbafError
from abaf.features.extract import extract_corpus, load_corpus_bundles
from abaf.features.hsf import hsf_feature_names
from abaf.forest import RfConfig
from abaf.harness import (
    aggregate_repeats,
    run_ablation,
    run_fusion_experiment,
    run_single_feature_experiment,
    run_subtype_tasks,
    run_threshold_sweep,
    write_csv,
    write_json,
    write_plots,
)
from abaf.models import STREAM_ORDER

_BAND_TABLES = {"hamd17": HAMD17_BANDS, "phq9": PHQ9_BANDS}


def _default_seed() -> int:
    raw = os.environ.get("ABAF_SEED", "0")
    try:
        return int(raw)
    except ValueError as e:
        raise AbafError(f"ABAF_SEED must be an integer, got {raw!r}") from e


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="run seed (default: ABAF_SEED env var, then 0)")
    p.add_argument("--config", type=Path, default=None,
                   help="flat section.key = value config file")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk",
                   help="base configuration profile")


def _resolve_config(args) -> PipelineConfig:
    cfg = profile_config(args.profile)
    if args.config is not None:
        if not args.config.exists():
            raise FileNotFoundError(f"{args.config}: config file not found")
        cfg = load_config(args.config, base=cfg)
    return cfg


def _resolve_seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _load_cache(args) -> tuple[CorpusManifest, list, PipelineConfig]:
    cfg = _resolve_config(args)
    manifest_path = Path(args.cache) / "manifest.csv"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{manifest_path}: manifest not found in cache dir")
    manifest = load_manifest(manifest_path)
    bundles = load_corpus_bundles(manifest, args.cache, cfg)
    return manifest, bundles, cfg


def _labels(manifest: CorpusManifest) -> np.ndarray:
    return np.array([r.label for r in manifest.records], dtype=np.int64)


def _scale_scores(manifest: CorpusManifest) -> np.ndarray:
    missing = [r.subject_id for r in manifest.records if r.scale_score is None]
    if missing:
        raise AbafError(
            f"scale_score missing for {len(missing)} subjects "
            f"(first: {missing[0]}); subtype/sweep tasks need scored manifests"
        )
    return np.array([r.scale_score for r in manifest.records], dtype=np.float64)


def _band_table(manifest: CorpusManifest, choice: str):
    if choice != "auto":
        return _BAND_TABLES[choice]
    kinds = {r.scale_kind for r in manifest.records}
    if len(kinds) == 1 and (kind := kinds.pop()) in _BAND_TABLES:
        return _BAND_TABLES[kind]
    raise AbafError(
        f"cannot infer band table from manifest scale kinds {sorted(kinds)}; "
        "pass --scale hamd17 or --scale phq9"
    )


def _write_report(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(report, out_dir / "report.csv")
    write_json(report, out_dir / "report.json")
    write_plots(report, out_dir)


def _fmt_agg(report) -> str:
    agg = report.aggregate()
    acc_m, acc_s = agg["acc"]
    roc_m, _ = agg["roc_auc"]
    roc_txt = "n/a" if roc_m is None else f"{roc_m:.3f}"
    return f"acc {acc_m:.3f} +/- {acc_s:.3f}, roc_auc {roc_txt}"


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_per_class=args.n,
        duration_s=args.duration,
        sample_rate=args.sr,
        class1_pitch_shift=args.pitch_shift,
        class1_tilt_db=args.tilt_db,
        class1_tempo_factor=args.tempo,
    )
    manifest = generate_synthetic_corpus(spec, _resolve_seed(args), args.out)
    print(f"synth: {len(manifest.records)} wavs + manifest.csv -> {args.out}")
    return 0


def _cmd_extract(args) -> int:
    cfg = _resolve_config(args)
    overrides = {}
    if args.vad_ht is not None:
        overrides["vad.ht_frac"] = str(args.vad_ht)
    if args.vad_lt is not None:
        overrides["vad.lt_frac"] = str(args.vad_lt)
    if args.frame_ms is not None:
        overrides["vad.frame_ms"] = str(args.frame_ms)
    if args.hop_ms is not None:
        overrides["vad.hop_ms"] = str(args.hop_ms)
    if overrides:
        cfg = apply_overrides(cfg, overrides)

    if not Path(args.manifest).exists():
        raise FileNotFoundError(f"{args.manifest}: manifest not found")
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    bundles, n_computed = extract_corpus(
        manifest, Path(args.manifest).parent, out, cfg, jobs=args.jobs
    )

    # hsf.csv: subject_id + the 6552 named columns, full precision.
    names = hsf_feature_names()
    lines = [",".join(["subject_id", *names])]
    for rec, bundle in zip(manifest.records, bundles):
        vals = ",".join(f"{v:.12g}" for v in bundle.hsf)
        lines.append(f"{rec.subject_id},{vals}")
    (out / "hsf.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if Path(args.manifest).resolve() != (out / "manifest.csv").resolve():
        shutil.copyfile(args.manifest, out / "manifest.csv")

    cached = len(bundles) - n_computed
    print(
        f"extract: {len(bundles)} bundles ({n_computed} computed, {cached} cached), "
        f"config hash {extraction_hash(cfg)} -> {out}"
    )
    return 0


def _cmd_train_single(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    out = Path(args.out)
    report = run_single_feature_experiment(
        bundles, _labels(manifest), args.feature, cfg, _resolve_seed(args),
        k=args.folds, out_dir=out,
    )
    _write_report(report, out)
    print(f"train-single[{args.feature}]: {_fmt_agg(report)} -> {out}")
    return 0


def _cmd_train_fusion(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    if args.fine_tune_all:
        cfg = apply_overrides(cfg, {"train.fine_tune_all": "true"})
    out = Path(args.out)
    report = run_fusion_experiment(
        bundles, _labels(manifest), cfg, _resolve_seed(args),
        k=args.folds, out_dir=out,
    )
    _write_report(report, out)
    print(f"train-fusion: {_fmt_agg(report)} -> {out}")
    return 0


def _cmd_ablate(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    out = Path(args.out)
    reports = run_ablation(
        bundles, _labels(manifest), cfg, _resolve_seed(args),
        k=args.folds, exclude=args.exclude, out_dir=out,
    )
    for left_out, report in reports.items():
        _write_report(report, out / f"no_{left_out}")
        print(f"ablate[no_{left_out}]: {_fmt_agg(report)}")
    print(f"ablate: {len(reports)} exclusion runs -> {out}")
    return 0


def _cmd_subtype(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    scores = _scale_scores(manifest)
    bands = _band_table(manifest, args.scale)
    pairs = None
    if args.pairs:
        pairs = [tuple(p.split(":")) for p in args.pairs.split(",")]
        for pair in pairs:
            if len(pair) != 2:
                raise AbafError(f"--pairs entries must be A:B, got {':'.join(pair)!r}")
    out = Path(args.out)
    results = run_subtype_tasks(
        bundles, scores, bands, cfg, _resolve_seed(args),
        repeats=args.repeats, k=args.folds, pairs=pairs,
    )
    import json

    for key, reports in results.items():
        pair_dir = out / key
        pair_dir.mkdir(parents=True, exist_ok=True)
        for i, rep in enumerate(reports):
            write_csv(rep, pair_dir / f"rep{i}.csv")
        agg = aggregate_repeats(reports)
        summary = {
            c: {"mean": m, "std": s} for c, (m, s) in sorted(agg.items())
        }
        (pair_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        m, s = agg["acc"]
        print(f"subtype[{key}]: acc {m:.3f} +/- {s:.3f} over {len(reports)} repeats")
    print(f"subtype: {len(results)} pairs -> {out}")
    return 0


def _cmd_sweep(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    scores = _scale_scores(manifest)
    thresholds = [float(t) for t in args.thresholds.split(",")]
    out = Path(args.out)
    reports = run_threshold_sweep(
        bundles, scores, thresholds, cfg, _resolve_seed(args), k=args.folds
    )
    for t, report in reports.items():
        _write_report(report, out / f"t{t:g}")
        pr_m, pr_s = report.aggregate()["pr_auc"]
        pr_txt = "n/a" if pr_m is None else f"{pr_m:.3f} +/- {pr_s:.3f}"
        print(f"sweep[t={t:g}]: pr_auc {pr_txt}")
    print(f"sweep: {len(reports)} thresholds -> {out}")
    return 0


def _cmd_analyze(args) -> int:
    manifest, bundles, cfg = _load_cache(args)
    hsf = np.stack([b.hsf for b in bundles])
    rows = rank_significant_features(
        hsf,
        _labels(manifest),
        alpha=args.alpha,
        filter_on=args.filter,
        rf_cfg=RfConfig(
            n_trees=args.trees,
            max_depth=args.max_depth,
            min_leaf=args.min_leaf,
            seed=_resolve_seed(args),
        ),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not rows:
        print(f"analyze: no features pass {args.filter} < {args.alpha:g}; "
              "no report written")
        return 0
    emit_feature_report(rows, out / "feature_report.csv")
    print(
        f"analyze: {len(rows)} features pass {args.filter} < {args.alpha:g} "
        f"-> {out / 'feature_report.csv'}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="abaf",
        description="Acoustic feature fusion pipeline for binary speech classification.",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", formatter_class=fmt,
                       help="generate a synthetic labeled corpus")
    _add_common(p)
    p.add_argument("--n", type=int, default=100, help="clips per class")
    p.add_argument("--duration", type=float, default=3.0, help="clip seconds")
    p.add_argument("--sr", type=int, default=16000, help="sample rate")
    p.add_argument("--pitch-shift", type=float, default=-30.0,
                   help="class-1 base pitch offset in Hz")
    p.add_argument("--tilt-db", type=float, default=-3.0,
                   help="class-1 spectral tilt in dB/octave")
    p.add_argument("--tempo", type=float, default=0.85,
                   help="class-1 tempo factor")
    p.add_argument("--out", type=Path, required=True, help="corpus directory")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("extract", formatter_class=fmt,
                       help="extract and cache feature bundles")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True, help="manifest.csv path")
    p.add_argument("--out", type=Path, required=True, help="cache directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--vad-ht", type=float, default=None,
                   help="override vad.ht_frac (high threshold fraction)")
    p.add_argument("--vad-lt", type=float, default=None,
                   help="override vad.lt_frac (low threshold fraction)")
    p.add_argument("--frame-ms", type=float, default=None,
                   help="override vad.frame_ms")
    p.add_argument("--hop-ms", type=float, default=None, help="override vad.hop_ms")
    p.set_defaults(fn=_cmd_extract)

    def cache_opts(p):
        p.add_argument("--cache", type=Path, required=True,
                       help="cache directory produced by extract")
        p.add_argument("--folds", type=int, default=5, help="cross-validation folds")
        p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("train-single", formatter_class=fmt,
                       help="cross-validate one stream's sub-model")
    _add_common(p)
    cache_opts(p)
    p.add_argument("--feature", choices=STREAM_ORDER, required=True,
                   help="which stream to train")
    p.set_defaults(fn=_cmd_train_single)

    p = sub.add_parser("train-fusion", formatter_class=fmt,
                       help="cross-validate the full fusion pipeline")
    _add_common(p)
    cache_opts(p)
    p.add_argument("--fine-tune-all", action="store_true",
                   help="backpropagate through sub-models during fusion training")
    p.set_defaults(fn=_cmd_train_fusion)

    p = sub.add_parser("ablate", formatter_class=fmt,
                       help="leave-one-stream-out fusion runs")
    _add_common(p)
    cache_opts(p)
    p.add_argument("--exclude", choices=STREAM_ORDER, default=None,
                   help="run only this exclusion (default: all four)")
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("subtype", formatter_class=fmt,
                       help="pairwise severity-band classification")
    _add_common(p)
    cache_opts(p)
    p.add_argument("--scale", choices=("auto", "hamd17", "phq9"), default="auto",
                   help="severity band table")
    p.add_argument("--repeats", type=int, default=10,
                   help="downsampling repeats per pair")
    p.add_argument("--pairs", type=str, default=None,
                   help="comma-separated A:B band pairs (default: all)")
    p.set_defaults(fn=_cmd_subtype)

    p = sub.add_parser("sweep", formatter_class=fmt,
                       help="fusion experiments over labeling thresholds")
    _add_common(p)
    cache_opts(p)
    p.add_argument("--thresholds", type=str, default="3,4,5",
                   help="comma-separated scale-score thresholds")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("analyze", formatter_class=fmt,
                       help="significance-ranked HSF feature report")
    _add_common(p)
    p.add_argument("--cache", type=Path, required=True,
                   help="cache directory produced by extract")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--alpha", type=float, default=0.01,
                   help="significance threshold")
    p.add_argument("--filter", choices=("q", "p"), default="q",
                   help="gate on FDR-adjusted q or raw p")
    p.add_argument("--trees", type=int, default=100, help="random forest size")
    p.add_argument("--max-depth", type=int, default=None,
                   help="tree depth cap (default: unlimited)")
    p.add_argument("--min-leaf", type=int, default=1,
                   help="minimum samples per leaf")
    p.set_defaults(fn=_cmd_analyze)

    return parser


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (AbafError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
