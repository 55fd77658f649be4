"""The 56 low-level descriptors on a shared 25 ms / 10 ms frame grid.

Row layout of the LLD matrix (fixed, relied on downstream):

    0      logenergy          10*log10(sum s^2 * w) with a -87 dB floor
    1      zcr                strict sign changes per frame / (frame_len - 1)
    2-5    fband*             power summed over bins with lo <= f <= hi (Hz)
    6-9    spectralRollOff*   lowest bin frequency (Hz) holding >= p% of power
    10     spectralFlux       L2 distance of successive unit-L2 magnitude spectra
    11     spectralCentroid   power-weighted mean bin frequency (Hz)
    12-13  spectralMaxPos/MinPos  argmax/argmin bin index / (n_bins - 1)
    14-26  mfcc[0-12]         DCT-II of the 26 log-mel bands
    27-52  melspec[0-25]      log10(filterbank @ power + 1e-10)
    53     voiceProb          max normalized autocorrelation in the pitch lag
                              range, clipped at 0
    54     F0                 sample_rate / best lag when voiceProb > threshold,
                              else 0
    55     F0env              running max of F0 with exp(-1/3) per-frame decay

Spectral rows use the same Hamming-windowed frames zero-padded to ``n_fft``;
voicing rows use mean-removed raw frames.  The autocorrelation kernel has a
direct-loop variant (numba) and an FFT variant (numpy) selected once at import.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from abaf import backend
from abaf.features.spectral import _dct_ii_matrix, mel_filterbank
from abaf.preprocess import frame_signal, window_array

LOG_ENERGY_FLOOR_DB = -87.0

_BANDS_HZ: tuple[tuple[float, float], ...] = (
    (0.0, 250.0),
    (0.0, 650.0),
    (230.0, 650.0),
    (1000.0, 4000.0),
)
_ROLLOFF_PCT: tuple[float, ...] = (25.0, 50.0, 75.0, 90.0)

LLD_NAMES: tuple[str, ...] = (
    ("logenergy", "zcr")
    + tuple(f"fband{int(lo)}-{int(hi)}" for lo, hi in _BANDS_HZ)
    + tuple(f"spectralRollOff{p}" for p in _ROLLOFF_PCT)
    + ("spectralFlux", "spectralCentroid", "spectralMaxPos", "spectralMinPos")
    + tuple(f"mfcc[{i}]" for i in range(13))
    + tuple(f"melspec[{i}]" for i in range(26))
    + ("voiceProb", "F0", "F0env")
)

N_LLDS = len(LLD_NAMES)


@dataclass(frozen=True)
class LldConfig:
    frame_len: int = 400
    hop: int = 160
    n_fft: int = 512
    window: str = "hamming"
    n_mels: int = 26
    n_mfcc: int = 13
    f_min: float = 0.0
    f_max: float | None = None
    f0_min_hz: float = 62.5
    f0_max_hz: float = 500.0
    voicing_threshold: float = 0.45

    def __post_init__(self) -> None:
        if self.n_fft < self.frame_len:
            raise ValueError(f"n_fft {self.n_fft} < frame_len {self.frame_len}")
        if not 0.0 < self.f0_min_hz < self.f0_max_hz:
            raise ValueError(f"bad pitch range [{self.f0_min_hz}, {self.f0_max_hz}]")
        # The 56-row layout (and the 6552-dim vector built on it) hardcodes
        # 13 cepstral and 26 mel rows; these fields document, not tune.
        if self.n_mfcc != 13 or self.n_mels != 26:
            raise ValueError("LLD layout requires n_mfcc=13 and n_mels=26")


def _autocorr_np(frames: np.ndarray, lag_max: int) -> np.ndarray:
    """Linear autocorrelation r(0..lag_max) per frame via FFT."""
    n_needed = frames.shape[1] + lag_max + 1
    n_fft = 1 << (n_needed - 1).bit_length()
    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    r = np.fft.irfft(spec * np.conj(spec), n=n_fft, axis=1)
    return np.ascontiguousarray(r[:, : lag_max + 1])


if backend.HAS_NUMBA:
    import numba

    @numba.njit(cache=True)
    def _autocorr_nb(frames: np.ndarray, lag_max: int) -> np.ndarray:  # pragma: no cover
        n_frames, width = frames.shape
        out = np.empty((n_frames, lag_max + 1), dtype=np.float64)
        for t in range(n_frames):
            for lag in range(lag_max + 1):
                acc = 0.0
                for m in range(width - lag):
                    acc += frames[t, m] * frames[t, m + lag]
                out[t, lag] = acc
        return out

else:  # pragma: no cover
    _autocorr_nb = None

_autocorr = backend.select(_autocorr_np, _autocorr_nb)


def _voicing_rows(
    frames: np.ndarray, sample_rate: int, cfg: LldConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lag_min = int(round(sample_rate / cfg.f0_max_hz))
    lag_max = int(round(sample_rate / cfg.f0_min_hz))
    lag_max = min(lag_max, cfg.frame_len - 1)
    if lag_min < 1 or lag_min >= lag_max:
        raise ValueError(f"pitch lag range [{lag_min}, {lag_max}] is empty")

    centered = frames - frames.mean(axis=1, keepdims=True)
    r = _autocorr(np.ascontiguousarray(centered), lag_max)
    r0 = r[:, 0]
    valid = r0 > 1e-14
    rho = np.zeros_like(r)
    rho[valid] = r[valid] / r0[valid, None]
    window = rho[:, lag_min : lag_max + 1]

    voice_prob = np.maximum(window.max(axis=1), 0.0)
    voice_prob[~valid] = 0.0
    best_lag = lag_min + np.argmax(window, axis=1)
    voiced = valid & (voice_prob > cfg.voicing_threshold)
    f0 = np.where(voiced, sample_rate / best_lag, 0.0)

    env = np.empty_like(f0)
    decay = float(np.exp(-1.0 / 3.0))
    prev = 0.0
    for t in range(f0.size):
        prev = max(f0[t], prev * decay)
        env[t] = prev
    return voice_prob, f0, env


def compute_llds(
    x: np.ndarray, sample_rate: int, cfg: LldConfig | None = None
) -> tuple[np.ndarray, tuple[str, ...]]:
    """LLD matrix of shape (56, T) plus the parallel name tuple."""
    if cfg is None:
        cfg = LldConfig()
    x = np.asarray(x, dtype=np.float64)
    frames = frame_signal(x, cfg.frame_len, cfg.hop)
    n_frames = frames.shape[0]
    w = window_array(cfg.window, cfg.frame_len)

    out = np.zeros((N_LLDS, n_frames), dtype=np.float64)
    ste = (frames**2) @ w
    out[0] = np.maximum(10.0 * np.log10(ste + 1e-30), LOG_ENERGY_FLOOR_DB)
    out[1] = (frames[:, :-1] * frames[:, 1:] < 0).sum(axis=1) / (cfg.frame_len - 1)

    padded = np.zeros((n_frames, cfg.n_fft), dtype=np.float64)
    padded[:, : cfg.frame_len] = frames * w
    mag = np.abs(np.fft.rfft(padded, axis=1))
    power = mag**2
    n_bins = power.shape[1]
    bin_hz = np.arange(n_bins, dtype=np.float64) * sample_rate / cfg.n_fft

    row = 2
    for lo, hi in _BANDS_HZ:
        mask = (bin_hz >= lo) & (bin_hz <= hi)
        out[row] = power[:, mask].sum(axis=1)
        row += 1

    total = power.sum(axis=1)
    has_power = total > 0.0
    cum = np.cumsum(power, axis=1)
    for pct in _ROLLOFF_PCT:
        # First bin whose cumulative power reaches pct% of the frame total.
        idx = np.argmax(cum >= (pct / 100.0) * total[:, None], axis=1)
        out[row] = np.where(has_power, bin_hz[idx], 0.0)
        row += 1

    norms = np.linalg.norm(mag, axis=1, keepdims=True)
    unit = np.divide(mag, norms, out=np.zeros_like(mag), where=norms > 0.0)
    out[10, 1:] = np.linalg.norm(np.diff(unit, axis=0), axis=1)

    centroid = np.divide(
        power @ bin_hz, total, out=np.zeros(n_frames), where=has_power
    )
    out[11] = centroid
    out[12] = np.argmax(power, axis=1) / (n_bins - 1)
    out[13] = np.argmin(power, axis=1) / (n_bins - 1)

    fb = mel_filterbank(cfg.n_fft, cfg.n_mels, sample_rate, cfg.f_min, cfg.f_max)
    logmel = np.log10(fb.weights @ power.T + 1e-10)
    out[27 : 27 + cfg.n_mels] = logmel
    out[14 : 14 + cfg.n_mfcc] = _dct_ii_matrix(cfg.n_mfcc, cfg.n_mels) @ logmel

    out[53], out[54], out[55] = _voicing_rows(frames, sample_rate, cfg)
    return out, LLD_NAMES
