"""Resampling and dual-threshold endpoint detection (VAD).

The VAD rule: a segment starts at the first frame whose short-time energy
exceeds HT and ends at the next frame falling below LT, repeated across the
clip for multiple segments. Thresholds are fractions of the max STE, which
makes detection invariant to input gain. ZCR contributes only through the
optional boundary extension (it catches trailing/leading fricatives that
carry little energy but many crossings).

Pipeline order is VAD first, at the native rate, then resampling.
"""

import math
from dataclasses import dataclass

import numpy as np

from abaf import backend
from abaf.corpus.wav import AudioClip
from abaf.errors import VadError
from abaf.types import Contour, VadSegments

_SINC_HALF_ZEROS = 12  # zero crossings per side of the prototype lowpass
_ZCR_GUARD_FRAMES = 20  # ambience calibration skips this many frames (~200 ms) around each segment


@dataclass(frozen=True)
class FrameSpec:
    frame_len: int = 400  # samples (25 ms at 16 kHz)
    hop: int = 160  # samples (10 ms at 16 kHz)
    window: str = "hamming"

    def __post_init__(self):
        if not (0 < self.hop <= self.frame_len):
            raise ValueError(f"need 0 < hop <= frame_len, got hop={self.hop}, frame_len={self.frame_len}")
        if self.window not in ("hamming", "hanning", "rect"):
            raise ValueError(f"unknown window {self.window!r}")

    @staticmethod
    def from_ms(sr: int, frame_ms: float = 25.0, hop_ms: float = 10.0, window: str = "hamming") -> "FrameSpec":
        return FrameSpec(int(round(sr * frame_ms / 1000.0)), int(round(sr * hop_ms / 1000.0)), window)


@dataclass(frozen=True)
class VadParams:
    ht_frac: float = 0.10
    lt_frac: float = 0.02
    zcr_extend: bool = True
    min_segment_ms: float = 50.0

    def __post_init__(self):
        if not (0.0 < self.ht_frac <= 1.0):
            raise ValueError("ht_frac must be in (0, 1]")
        if not (0.0 < self.lt_frac < self.ht_frac):
            raise ValueError("need 0 < lt_frac < ht_frac")


def window_array(name: str, n: int) -> np.ndarray:
    if name == "hamming":
        return np.hamming(n)
    if name == "hanning":
        return np.hanning(n)
    if name == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window {name!r}")


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(n_frames, frame_len) view of x; n_frames = floor((L - frame_len)/hop) + 1."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if len(x) < frame_len:
        raise ValueError(f"clip of {len(x)} samples is shorter than one frame ({frame_len})")
    n_frames = (len(x) - frame_len) // hop + 1
    stride = x.strides[0]
    return np.lib.stride_tricks.as_strided(
        x, shape=(n_frames, frame_len), strides=(hop * stride, stride), writeable=False
    )


# ---------------------------------------------------------------------------
# resampling


def _design_lowpass(up: int, down: int) -> np.ndarray:
    """Hamming-windowed sinc at the upsampled rate, cutoff at the narrower
    Nyquist, unity passband gain after zero-stuffing (factor `up`)."""
    m = max(up, down)
    half = _SINC_HALF_ZEROS * m
    n = np.arange(-half, half + 1, dtype=np.float64)
    fc = 0.5 / m  # cycles per upsampled sample
    h = 2.0 * fc * np.sinc(2.0 * fc * n)
    h *= np.hamming(len(h))
    h /= h.sum()  # exact DC gain 1 before the up-factor
    return h * up


def _resample_core_np(x: np.ndarray, h: np.ndarray, up: int, down: int, out_len: int) -> np.ndarray:
    n = len(x)
    taps = len(h)
    delay = (taps - 1) // 2
    m = np.arange(out_len)
    j0 = m * down + delay  # rightmost filter position in the upsampled domain
    q = j0 // up
    p = j0 - q * up
    y = np.zeros(out_len)
    for r in range((taps - p.min() + up - 1) // up):
        hi = p + r * up
        xi = q - r
        ok = (hi < taps) & (xi >= 0) & (xi < n)
        if not ok.any():
            continue
        y[ok] += h[hi[ok]] * x[xi[ok]]
    return y


if backend.HAS_NUMBA:
    import numba

    @numba.njit(cache=True)
    def _resample_core_nb(x, h, up, down, out_len):  # pragma: no cover - parity-tested
        n = len(x)
        taps = len(h)
        delay = (taps - 1) // 2
        y = np.zeros(out_len)
        for m in range(out_len):
            j0 = m * down + delay
            q = j0 // up
            p = j0 - q * up
            acc = 0.0
            r = 0
            while p + r * up < taps:
                xi = q - r
                if 0 <= xi < n:
                    acc += h[p + r * up] * x[xi]
                r += 1
            y[m] = acc
        return y

else:
    _resample_core_nb = None

_resample_core = backend.select(_resample_core_np, _resample_core_nb)


def resample(clip: AudioClip, target_sr: int) -> AudioClip:
    """Windowed-sinc polyphase resampling; output length round(n * target/source)."""
    if target_sr <= 0:
        raise ValueError(f"target_sr must be positive, got {target_sr}")
    if target_sr == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    g = math.gcd(clip.sample_rate, target_sr)
    up = target_sr // g
    down = clip.sample_rate // g
    n = len(clip.samples)
    out_len = int(math.floor(n * target_sr / clip.sample_rate + 0.5))
    h = _design_lowpass(up, down)
    y = _resample_core(np.ascontiguousarray(clip.samples, dtype=np.float64), h, up, down, out_len)
    return AudioClip(y, target_sr)


# ---------------------------------------------------------------------------
# contours


def short_time_energy(clip: AudioClip, spec: FrameSpec) -> Contour:
    """Per-frame E = sum(s^2 * w): the window weights the squared samples once."""
    frames = frame_signal(clip.samples, spec.frame_len, spec.hop)
    w = window_array(spec.window, spec.frame_len)
    return Contour((frames**2) @ w, clip.sample_rate / spec.hop)


def zero_crossing_rate(clip: AudioClip, spec: FrameSpec) -> Contour:
    """Per-frame count of strict sign changes divided by (frame_len - 1)."""
    frames = frame_signal(clip.samples, spec.frame_len, spec.hop)
    changes = (frames[:, :-1] * frames[:, 1:] < 0).sum(axis=1)
    return Contour(changes / (spec.frame_len - 1), clip.sample_rate / spec.hop)


# ---------------------------------------------------------------------------
# endpoint detection


def detect_endpoints(
    ste: Contour, zcr: Contour, params: VadParams, sr: int, clip_len: int | None = None
) -> VadSegments:
    """Dual-threshold scan over the STE contour, optional ZCR extension.

    sr is the rate the contours were computed at; clip_len (samples) bounds
    the final segment when speech runs through the end of the clip.
    """
    e = np.asarray(ste.values)
    if len(e) == 0:
        raise ValueError("empty STE contour")
    if len(e) != len(zcr.values):
        raise ValueError(f"contour length mismatch: {len(e)} vs {len(zcr.values)}")
    hop = int(round(sr / ste.frame_rate))
    if clip_len is None:
        clip_len = (len(e) - 1) * hop + hop  # best effort without the true length

    peak = float(e.max())
    if peak <= 0.0:
        return VadSegments([])
    ht = params.ht_frac * peak
    lt = params.lt_frac * peak

    n = len(e)
    frame_segs = []
    i = 0
    while i < n:
        while i < n and e[i] <= ht:
            i += 1
        if i >= n:
            break
        start = i
        j = start + 1
        while j < n and e[j] >= lt:
            j += 1
        frame_segs.append([start, j])  # j = n means the segment ran off the end
        i = j + 1

    if params.zcr_extend and frame_segs:
        z = np.asarray(zcr.values)
        # Fricative capture, calibrated against the ambience. Unvoiced
        # consonants sit just outside the energy segments, so the ambience
        # reference must exclude a guard zone around each boundary; the
        # gate is strictly above everything ambient plus a robust margin,
        # because thresholds drawn from the whole contour (median, quantiles)
        # run away on clips whose quiet frames are broadband noise and
        # therefore have the HIGHER crossing rate.
        ambient = np.ones(n, dtype=bool)
        guard = _ZCR_GUARD_FRAMES
        for start, end in frame_segs:
            ambient[max(start - guard, 0):min(end + guard, n)] = False
        if not ambient.any():
            ambient = np.ones(n, dtype=bool)
            for start, end in frame_segs:
                ambient[start:min(end, n)] = False
        if ambient.any():
            za = z[ambient]
            mad = float(np.median(np.abs(za - np.median(za))))
            thr = float(za.max()) + 3.0 * mad
            for idx, seg in enumerate(frame_segs):
                lo_bound = frame_segs[idx - 1][1] if idx > 0 else 0
                hi_bound = frame_segs[idx + 1][0] if idx + 1 < len(frame_segs) else n
                while seg[0] > lo_bound and z[seg[0] - 1] > thr:
                    seg[0] -= 1
                while seg[1] < hi_bound and z[seg[1]] > thr:
                    seg[1] += 1

    min_len = int(params.min_segment_ms * sr / 1000.0)
    out = []
    for start, end in frame_segs:
        s = start * hop
        t = clip_len if end >= n else end * hop
        t = min(t, clip_len)
        if t - s >= min_len:
            out.append((s, t))
    return VadSegments(out)


def apply_vad(clip: AudioClip, segments: VadSegments) -> AudioClip:
    """Concatenate the detected sample ranges. Empty segments are an error:
    a clip with no detected speech must be flagged, not silently emptied."""
    if len(segments) == 0:
        raise VadError("no speech segments detected")
    n = len(clip.samples)
    parts = []
    for s, t in segments.segments:
        if not (0 <= s < t <= n):
            raise ValueError(f"segment ({s}, {t}) out of range for clip of {n} samples")
        parts.append(clip.samples[s:t])
    return AudioClip(np.concatenate(parts), clip.sample_rate)


def run_vad(clip: AudioClip, frame: FrameSpec, params: VadParams) -> AudioClip:
    """Convenience composition: contours, endpoints, apply."""
    ste = short_time_energy(clip, frame)
    zcr = zero_crossing_rate(clip, frame)
    segs = detect_endpoints(ste, zcr, params, clip.sample_rate, clip_len=len(clip.samples))
    return apply_vad(clip, segs)
