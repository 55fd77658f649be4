"""RIFF/WAVE PCM16 reading and writing.

Parsed by hand rather than through the stdlib ``wave`` module so that a
malformed file raises a WavFormatError naming the exact field that failed
(riff_magic, audio_format, ...), which the tests pin down.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from abaf.errors import WavFormatError

PCM16_SCALE = 32768.0


@dataclass
class AudioClip:
    """Mono float64 samples in [-1, 1] plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / float(self.sample_rate)


def read_wav(path) -> AudioClip:
    """Read a PCM16 WAV file; stereo is downmixed by channel mean.

    Sample values are int16 / 32768, so full-scale negative maps to -1.0.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        raw = fh.read()

    if len(raw) < 12:
        raise WavFormatError("riff_header", f"file too short ({len(raw)} bytes)")
    if raw[0:4] != b"RIFF":
        raise WavFormatError("riff_magic", f"expected b'RIFF', got {raw[0:4]!r}")
    if raw[8:12] != b"WAVE":
        raise WavFormatError("wave_magic", f"expected b'WAVE', got {raw[8:12]!r}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (csize,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + csize]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError("fmt_chunk", f"fmt chunk too short ({len(body)} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < csize:
                raise WavFormatError("data_size", f"data chunk declares {csize} bytes, {len(body)} present")
            data = body
        # chunks are word-aligned; odd sizes carry a pad byte
        pos += 8 + csize + (csize & 1)

    if fmt is None:
        raise WavFormatError("fmt_chunk", "no fmt chunk found")
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise WavFormatError("audio_format", f"only PCM (1) is supported, got {audio_format}")
    if channels < 1:
        raise WavFormatError("channels", "channel count must be >= 1")
    if bits != 16:
        raise WavFormatError("bits_per_sample", f"only 16-bit PCM is supported, got {bits}")
    if data is None:
        raise WavFormatError("data_chunk", "no data chunk found")

    frame_bytes = 2 * channels
    n = len(data) // frame_bytes
    ints = np.frombuffer(data[: n * frame_bytes], dtype="<i2").astype(np.float64)
    if channels > 1:
        ints = ints.reshape(n, channels).mean(axis=1)
    return AudioClip(samples=ints / PCM16_SCALE, sample_rate=int(sample_rate))


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono PCM16. Values are clipped to [-1, 1] before quantizing.

    Quantization is round(s * 32768) clamped to int16, which makes
    read_wav(write_wav(x)) exact for any x that came from PCM16.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"expected mono 1-d samples, got shape {s.shape}")
    q = np.clip(np.rint(np.clip(s, -1.0, 1.0) * PCM16_SCALE), -32768, 32767).astype("<i2")
    body = q.tobytes()

    hdr = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate, sample_rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(body))
    with open(path, "wb") as fh:
        fh.write(hdr + body)
