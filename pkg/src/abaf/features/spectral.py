"""Short-time spectral transforms: STFT magnitude, mel filterbank, MFCC.

All transforms take mono float64 audio and return :class:`abaf.types.SpectroMatrix`
with shape (bins, frames).  Frames are laid out by :func:`abaf.preprocess.frame_signal`,
so frame t covers samples [t*hop, t*hop + n_fft).
"""

from __future__ import annotations

import numpy as np

from abaf.preprocess import frame_signal, window_array
from abaf.types import MelFilterbank, SpectroMatrix

# Mel scale constant: mel(f) = _MEL_K * log10(1 + f/700).
_MEL_K = 2595.0
_MEL_BREAK_HZ = 700.0

DB_FLOOR = -80.0


def hz_to_mel(f: float | np.ndarray) -> float | np.ndarray:
    return _MEL_K * np.log10(1.0 + np.asarray(f, dtype=np.float64) / _MEL_BREAK_HZ)


def mel_to_hz(m: float | np.ndarray) -> float | np.ndarray:
    return _MEL_BREAK_HZ * (10.0 ** (np.asarray(m, dtype=np.float64) / _MEL_K) - 1.0)


def _magnitude_frames(x: np.ndarray, n_fft: int, hop: int, window: str) -> np.ndarray:
    """Windowed rfft magnitudes, shape (n_fft // 2 + 1, n_frames)."""
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a positive power of two, got {n_fft}")
    frames = frame_signal(np.asarray(x, dtype=np.float64), n_fft, hop)
    w = window_array(window, n_fft)
    spec = np.fft.rfft(frames * w, axis=1)
    return np.abs(spec).T


def stft_spectrogram(
    x: np.ndarray,
    n_fft: int,
    hop: int,
    window: str = "hanning",
    to_db: bool = False,
) -> SpectroMatrix:
    """Magnitude spectrogram; optionally in dB relative to the global peak.

    dB scaling is 20*log10(|X| / max|X|) clipped below at ``DB_FLOOR``.  An
    all-zero signal maps to a flat floor matrix rather than -inf.
    """
    mag = _magnitude_frames(x, n_fft, hop, window)
    if not to_db:
        return SpectroMatrix(data=mag, bin_axis="linear_hz", log_scaled=False)
    peak = mag.max()
    if peak <= 0.0:
        db = np.full_like(mag, DB_FLOOR)
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mag / peak)
        db = np.maximum(db, DB_FLOOR)
    return SpectroMatrix(data=db, bin_axis="linear_hz", log_scaled=True)


def mel_filterbank(
    n_fft: int,
    n_mels: int,
    sample_rate: int,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> MelFilterbank:
    """Triangular filterbank on a uniform mel grid, peak weight 1 per filter.

    Grid has n_mels + 2 points from mel(f_min) to mel(f_max); filter i rises
    from point i to its apex at point i+1 and falls to zero at point i+2.
    """
    if f_max is None:
        f_max = sample_rate / 2.0
    if not 0.0 <= f_min < f_max <= sample_rate / 2.0:
        raise ValueError(f"need 0 <= f_min < f_max <= Nyquist, got [{f_min}, {f_max}]")
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    grid_mel = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    grid_hz = np.asarray(mel_to_hz(grid_mel), dtype=np.float64)
    bin_hz = np.arange(n_fft // 2 + 1, dtype=np.float64) * sample_rate / n_fft

    weights = np.zeros((n_mels, n_fft // 2 + 1), dtype=np.float64)
    for i in range(n_mels):
        lo, mid, hi = grid_hz[i], grid_hz[i + 1], grid_hz[i + 2]
        rising = (bin_hz - lo) / (mid - lo)
        falling = (hi - bin_hz) / (hi - mid)
        weights[i] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return MelFilterbank(
        weights=weights,
        f_min=float(f_min),
        f_max=float(f_max),
        apex_hz=grid_hz[1:-1].copy(),
    )


def mel_spectrogram(
    x: np.ndarray,
    n_fft: int,
    hop: int,
    n_mels: int,
    sample_rate: int,
    f_min: float = 0.0,
    f_max: float | None = None,
    window: str = "hanning",
    fb: MelFilterbank | None = None,
) -> SpectroMatrix:
    """log10 mel-band energies: log10(fb @ |STFT|^2 + 1e-10)."""
    mag = _magnitude_frames(x, n_fft, hop, window)
    if fb is None:
        fb = mel_filterbank(n_fft, n_mels, sample_rate, f_min, f_max)
    elif fb.weights.shape[1] != mag.shape[0]:
        raise ValueError(
            f"filterbank built for {fb.weights.shape[1]} bins, STFT has {mag.shape[0]}"
        )
    mel = np.log10(fb.weights @ (mag**2) + 1e-10)
    return SpectroMatrix(data=mel, bin_axis="mel", log_scaled=True)


def _dct_ii_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Orthonormal DCT-II basis, rows are coefficients."""
    n = np.arange(n_in, dtype=np.float64)
    k = np.arange(n_out, dtype=np.float64)[:, None]
    basis = np.cos(np.pi * (2.0 * n[None, :] + 1.0) * k / (2.0 * n_in))
    basis *= np.sqrt(2.0 / n_in)
    basis[0] /= np.sqrt(2.0)
    return basis


def mfcc(mel: SpectroMatrix, n_coef: int = 13) -> SpectroMatrix:
    """Cepstral coefficients: orthonormal DCT-II over each log-mel column."""
    if mel.bin_axis != "mel":
        raise ValueError(f"mfcc expects a mel matrix, got bin_axis={mel.bin_axis!r}")
    n_mels = mel.data.shape[0]
    if not 1 <= n_coef <= n_mels:
        raise ValueError(f"n_coef must be in [1, {n_mels}], got {n_coef}")
    coef = _dct_ii_matrix(n_coef, n_mels) @ mel.data
    return SpectroMatrix(data=coef, bin_axis="cepstral", log_scaled=False)
