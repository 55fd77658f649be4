"""Per-clip feature extraction and corpus-wide extraction with caching.

One clip flows: endpoint detection at the native rate, resample to the target
rate, then the four parallel feature paths (envelope image, dB spectrogram
image, log-mel image, HSF vector).  Corpus extraction memoizes each subject's
bundle in a cache directory keyed by subject id and extraction hash, and can
fan the cache misses out over worker processes while preserving manifest
order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from abaf.config import PipelineConfig, extraction_hash
from abaf.corpus.cache import FeatureBundle, load_feature_bundle, store_feature_bundle
from abaf.corpus.manifest import CorpusManifest
from abaf.corpus.wav import AudioClip, read_wav
from abaf.features.hsf import assemble_hsf
from abaf.features.images import rasterize, upper_envelope
from abaf.features.llds import LldConfig
from abaf.features.spectral import mel_spectrogram, stft_spectrogram
from abaf.preprocess import FrameSpec, VadParams, resample, run_vad


def extract_bundle(clip: AudioClip, cfg: PipelineConfig) -> FeatureBundle:
    """All four feature inputs for one clip."""
    frame = FrameSpec.from_ms(
        clip.sample_rate, cfg.vad.frame_ms, cfg.vad.hop_ms, cfg.vad.window
    )
    params = VadParams(
        ht_frac=cfg.vad.ht_frac,
        lt_frac=cfg.vad.lt_frac,
        zcr_extend=cfg.vad.zcr_extend,
        min_segment_ms=cfg.vad.min_segment_ms,
    )
    voiced = resample(run_vad(clip, frame, params), cfg.features.target_sr)

    fc = cfg.features
    sr = voiced.sample_rate
    side, chans = fc.side, fc.channels
    env = upper_envelope(voiced.samples, sr, fc.envelope_ms)
    spectro = stft_spectrogram(
        voiced.samples, fc.img_n_fft, fc.img_hop, fc.img_window, to_db=True
    )
    mel = mel_spectrogram(
        voiced.samples,
        fc.img_n_fft,
        fc.img_hop,
        fc.n_mels,
        sr,
        fc.f_min,
        fc.f_max,
        fc.img_window,
    )
    lld_cfg = LldConfig(f_min=fc.f_min, f_max=fc.f_max)
    hsf = assemble_hsf(voiced.samples, sr, lld_cfg)
    return FeatureBundle(
        envelope_image=rasterize(env, side, side, chans).pixels,
        spectrogram_image=rasterize(spectro, side, side, chans).pixels,
        mel_image=rasterize(mel, side, side, chans).pixels,
        hsf=hsf.values,
    )


def _extract_from_path(args: tuple[str, PipelineConfig]) -> FeatureBundle:
    path, cfg = args
    return extract_bundle(read_wav(path), cfg)


def resolve_wav_path(manifest_dir: str | Path, wav_path: str) -> Path:
    p = Path(wav_path)
    return p if p.is_absolute() else Path(manifest_dir) / p


def extract_corpus(
    manifest: CorpusManifest,
    manifest_dir: str | Path,
    cache_dir: str | Path,
    cfg: PipelineConfig,
    jobs: int = 1,
) -> tuple[list[FeatureBundle], int]:
    """Bundles in manifest order plus how many were computed (not cached)."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = extraction_hash(cfg)

    bundles: list[FeatureBundle | None] = []
    misses: list[int] = []
    for i, rec in enumerate(manifest.records):
        cached = load_feature_bundle(cache_dir, rec.subject_id, cfg_hash)
        bundles.append(cached)
        if cached is None:
            misses.append(i)

    if misses:
        tasks = [
            (str(resolve_wav_path(manifest_dir, manifest.records[i].wav_path)), cfg)
            for i in misses
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                computed = list(pool.map(_extract_from_path, tasks))
        else:
            computed = [_extract_from_path(t) for t in tasks]
        for i, bundle in zip(misses, computed):
            store_feature_bundle(
                cache_dir, manifest.records[i].subject_id, cfg_hash, bundle
            )
            bundles[i] = bundle
    return [b for b in bundles if b is not None], len(misses)


def load_corpus_bundles(
    manifest: CorpusManifest,
    cache_dir: str | Path,
    cfg: PipelineConfig,
) -> list[FeatureBundle]:
    """Cached bundles in manifest order; never recomputes.

    Raises FileNotFoundError naming the first subject whose bundle is absent
    (or was extracted under a different feature configuration).
    """
    cfg_hash = extraction_hash(cfg)
    bundles = []
    for rec in manifest.records:
        bundle = load_feature_bundle(cache_dir, rec.subject_id, cfg_hash)
        if bundle is None:
            raise FileNotFoundError(
                f"{Path(cache_dir) / rec.subject_id}.{cfg_hash}.feat: "
                "feature bundle missing; run extract first"
            )
        bundles.append(bundle)
    return bundles
