"""On-disk cache of extracted features, one file per subject.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic b'ABFB'
    4       1     format version (currently 1)
    5       1     config-hash length H
    6       H     extraction-config hash, ascii hex
    then four arrays (envelope_image, spectrogram_image, mel_image, hsf):
            1     name length L
            L     name, utf8
            1     ndim
            4*nd  dims, uint32
            8*n   data, float64

Files are keyed by subject id plus the extraction-config hash, so a config
change makes every old entry a miss instead of silently serving stale
features. A miss is reported as None, not an exception.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from abaf.errors import AbafError

MAGIC = b"ABFB"
VERSION = 1
_ARRAY_ORDER = ("envelope_image", "spectrogram_image", "mel_image", "hsf")


class CacheFormatError(AbafError, ValueError):
    """Raised when a cache file exists but cannot be parsed."""


@dataclass
class FeatureBundle:
    """The four per-subject feature streams in their model-ready form."""

    envelope_image: np.ndarray  # (C, H, W) in [0, 1]
    spectrogram_image: np.ndarray  # (C, H, W) in [0, 1]
    mel_image: np.ndarray  # (C, H, W) in [0, 1]
    hsf: np.ndarray  # (6552,)

    def arrays(self):
        return {name: getattr(self, name) for name in _ARRAY_ORDER}


def _cache_path(cache_dir, subject_id: str, config_hash: str) -> str:
    return os.path.join(cache_dir, f"{subject_id}.{config_hash[:16]}.feat")


def store_feature_bundle(cache_dir, subject_id: str, config_hash: str, bundle: FeatureBundle) -> str:
    """Write (or replace) the cache entry; returns the file path."""
    os.makedirs(cache_dir, exist_ok=True)
    path = _cache_path(cache_dir, subject_id, config_hash)
    hash_bytes = config_hash.encode("ascii")
    parts = [MAGIC, struct.pack("<BB", VERSION, len(hash_bytes)), hash_bytes]
    for name, arr in bundle.arrays().items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("utf8")
        parts.append(struct.pack("<B", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)
    return path


def load_feature_bundle(cache_dir, subject_id: str, config_hash: str):
    """Return the cached FeatureBundle, or None when there is no entry
    for this (subject_id, config_hash) pair."""
    path = _cache_path(cache_dir, subject_id, config_hash)
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CacheFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, hash_len = struct.unpack_from("<BB", raw, 4)
    if version != VERSION:
        raise CacheFormatError(f"{path}: unsupported format version {version}")
    stored_hash = raw[6 : 6 + hash_len].decode("ascii")
    if stored_hash != config_hash:
        return None  # written under a different extraction config
    pos = 6 + hash_len
    arrays = {}
    for expected in _ARRAY_ORDER:
        (name_len,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        name = raw[pos : pos + name_len].decode("utf8")
        pos += name_len
        if name != expected:
            raise CacheFormatError(f"{path}: expected array {expected!r}, found {name!r}")
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        count = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(dims).copy()
        pos += 8 * count
        arrays[name] = arr
    return FeatureBundle(**arrays)
