"""Deterministic synthetic speech-like corpus.

Each clip alternates silence with harmonic voiced segments. Class 1 is the
same generator with three optional planted differences: a base-pitch shift
in Hz, an extra spectral tilt in dB/octave on the harmonic stack, and a
tempo factor scaling voiced segment durations. With all three at their
neutral values the two classes are statistically identical, which is the
null corpus used to check that the harness does not hallucinate signal.

Everything is drawn from named substreams of one seed, so two calls with
the same (spec, seed) produce byte-identical WAVs and manifest no matter
where or when they run.
"""

import os
from dataclasses import dataclass

import numpy as np

from abaf.corpus.manifest import CorpusManifest, SubjectRecord, save_manifest
from abaf.corpus.wav import write_wav
from abaf.rng import stream

BASE_PITCH_HZ = 120.0
PITCH_JITTER_HZ = 2.0  # per-clip uniform jitter, both classes
HARMONIC_CAP_HZ = 800.0
SOURCE_SLOPE = 1.0  # harmonic k scaled by 1/k**SOURCE_SLOPE before tilt
VOICED_RANGE_S = (0.25, 0.50)
SILENCE_RANGE_S = (0.08, 0.20)
AMP_RANGE = (0.45, 0.75)
RAMP_S = 0.010


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int = 100
    duration_s: float = 3.0
    sample_rate: int = 16000
    class1_pitch_shift: float = 0.0
    class1_tilt_db: float = 0.0
    class1_tempo_factor: float = 1.0
    noise_db: float = -50.0


def _voiced_segment(rng: np.random.Generator, n: int, sr: int, f0: float, tilt_db: float, amp: float) -> np.ndarray:
    k_max = max(1, int(HARMONIC_CAP_HZ // f0))
    t = np.arange(n, dtype=np.float64) / sr
    sig = np.zeros(n)
    for k in range(1, k_max + 1):
        gain = (1.0 / k**SOURCE_SLOPE) * 10.0 ** (tilt_db * np.log2(k) / 20.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sig += gain * np.sin(2.0 * np.pi * k * f0 * t + phase)
    peak = np.max(np.abs(sig))
    if peak > 0:
        sig *= amp / peak
    m = int(RAMP_S * sr)
    if m > 0 and n >= 2 * m:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / m)
        sig[:m] *= ramp
        sig[-m:] *= ramp[::-1]
    return sig


def _render_clip(rng: np.random.Generator, spec: SynthSpec, label: int) -> np.ndarray:
    sr = spec.sample_rate
    n_total = int(round(spec.duration_s * sr))
    f0 = BASE_PITCH_HZ + rng.uniform(-PITCH_JITTER_HZ, PITCH_JITTER_HZ)
    tilt = 0.0
    tempo = 1.0
    if label == 1:
        f0 += spec.class1_pitch_shift
        tilt = spec.class1_tilt_db
        tempo = spec.class1_tempo_factor

    out = np.zeros(n_total)
    pos = 0
    while True:
        sil = rng.uniform(*SILENCE_RANGE_S)
        dur = rng.uniform(*VOICED_RANGE_S) * tempo
        amp = rng.uniform(*AMP_RANGE)
        start = pos + int(round(sil * sr))
        n_seg = int(round(dur * sr))
        if start >= n_total - int(0.15 * sr):
            break
        n_seg = min(n_seg, n_total - start)
        out[start : start + n_seg] += _voiced_segment(rng, n_seg, sr, f0, tilt, amp)
        pos = start + n_seg

    noise_sigma = 10.0 ** (spec.noise_db / 20.0)
    out += noise_sigma * rng.standard_normal(n_total)
    return np.clip(out, -0.99, 0.99)


def generate_synthetic_corpus(spec: SynthSpec, seed: int, out_dir) -> CorpusManifest:
    """Write 2 * n_per_class WAVs plus manifest.csv into out_dir.

    wav_path entries are bare filenames relative to the manifest location,
    which keeps the manifest itself byte-identical across output folders.
    """
    os.makedirs(out_dir, exist_ok=True)
    records = []
    idx = 0
    for label in (0, 1):
        for i in range(spec.n_per_class):
            rng = stream(seed, f"synth/class{label}/clip{i}")
            clip = _render_clip(rng, spec, label)
            name = f"s{idx:04d}.wav"
            write_wav(os.path.join(out_dir, name), clip, spec.sample_rate)
            records.append(SubjectRecord(f"s{idx:04d}", name, label, None, "synthetic"))
            idx += 1
    manifest = CorpusManifest(records)
    save_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
