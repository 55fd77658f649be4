"""Pipeline configuration: sectioned dataclasses, flat config files, profiles.

Config files are flat ``section.key = value`` lines ('#' comments allowed).
Values are parsed by the annotated field type; ``none`` reads as None for
optional fields.  Two named profiles exist:

* ``desk``  - the default: 64x64 single-channel images, 512/160 STFT, small
  recurrent widths.  Sized so the full pipeline runs on an unremarkable CPU.
* ``paper`` - 224x224 three-channel images, 2048/512 STFT, 291-dim selected
  HSF input, wider recurrences.

The extraction hash covers only keys that change extracted features (vad.* and
features.*), so cached bundles survive model/training tweaks.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import get_args, get_origin, get_type_hints

from abaf.errors import AbafError


class ConfigError(AbafError, ValueError):
    pass


@dataclass(frozen=True)
class VadConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hamming"
    ht_frac: float = 0.10
    lt_frac: float = 0.02
    zcr_extend: bool = True
    min_segment_ms: float = 50.0


@dataclass(frozen=True)
class FeatureConfig:
    target_sr: int = 16000
    side: int = 64
    channels: int = 1
    img_n_fft: int = 512
    img_hop: int = 160
    img_window: str = "hanning"
    n_mels: int = 26
    n_mfcc: int = 13
    envelope_ms: float = 20.0
    f_min: float = 0.0
    f_max: float | None = None


@dataclass(frozen=True)
class ModelConfig:
    seq_tokens: int = 16
    image_lstm_hidden: int = 48
    num_top_k: int = 64
    num_lstm_hidden: int = 64
    fusion_lstm_hidden: int = 64
    embed_dim: int = 128
    hidden_dim: int = 64
    dropout: float = 0.3
    wam_preset: str = "overall"


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    val_frac: float = 0.2
    fine_tune_all: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    profile: str = "desk"
    vad: VadConfig = field(default_factory=VadConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_SECTIONS = ("vad", "features", "model", "train")

# Keys that alter extracted features; the cache hash covers exactly these.
_EXTRACTION_SECTIONS = ("vad", "features")

_PROFILE_OVERRIDES: dict[str, dict[str, str]] = {
    "desk": {},
    "paper": {
        "features.side": "224",
        "features.channels": "3",
        "features.img_n_fft": "2048",
        "features.img_hop": "512",
        "model.seq_tokens": "56",
        "model.image_lstm_hidden": "128",
        "model.num_top_k": "291",
        "model.num_lstm_hidden": "291",
    },
}

PROFILE_NAMES = tuple(_PROFILE_OVERRIDES)


def _parse_value(raw: str, annotation) -> object:
    if get_origin(annotation) is not None:  # Optional[X] is Union[X, None]
        args = [a for a in get_args(annotation) if a is not type(None)]
        if raw.strip().lower() in ("none", "null", ""):
            return None
        annotation = args[0]
    if annotation is bool:
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if annotation is int:
        return int(raw.strip())
    if annotation is float:
        return float(raw.strip())
    return raw.strip()


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    """Apply flat 'section.key' -> raw string overrides onto a config."""
    staged: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    for flat_key, raw in overrides.items():
        if flat_key == "profile":
            continue
        section, _, key = flat_key.partition(".")
        if section not in _SECTIONS or not key:
            raise ConfigError(f"unknown config key {flat_key!r}")
        sub = getattr(cfg, section)
        hints = get_type_hints(type(sub))
        if key not in hints:
            raise ConfigError(f"unknown config key {flat_key!r}")
        try:
            staged[section][key] = _parse_value(raw, hints[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {flat_key}: {raw!r} ({exc})") from exc
    out = cfg
    for section, kv in staged.items():
        if kv:
            out = replace(out, **{section: replace(getattr(out, section), **kv)})
    return out


def profile_config(name: str) -> PipelineConfig:
    if name not in _PROFILE_OVERRIDES:
        raise ConfigError(f"unknown profile {name!r}; choose from {PROFILE_NAMES}")
    cfg = apply_overrides(PipelineConfig(), _PROFILE_OVERRIDES[name])
    return replace(cfg, profile=name)


def to_flat(cfg: PipelineConfig) -> dict[str, str]:
    flat: dict[str, str] = {"profile": cfg.profile}
    for section in _SECTIONS:
        for key, value in asdict(getattr(cfg, section)).items():
            flat[f"{section}.{key}"] = "none" if value is None else str(value)
    return flat


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    lines = [f"{k} = {v}" for k, v in to_flat(cfg).items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_config_text(text: str) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a flat config file; an in-file profile key rebases the defaults."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    overrides = parse_config_text(p.read_text(encoding="utf-8"))
    cfg = base
    if cfg is None:
        cfg = profile_config(overrides.get("profile", "desk"))
    return apply_overrides(cfg, overrides)


def extraction_hash(cfg: PipelineConfig) -> str:
    """16-hex-digit digest of every setting that shapes extracted features."""
    flat = to_flat(cfg)
    relevant = sorted(
        f"{k}={v}" for k, v in flat.items() if k.split(".")[0] in _EXTRACTION_SECTIONS
    )
    digest = hashlib.sha256("\n".join(relevant).encode("utf-8")).hexdigest()
    return digest[:16]


def field_names(section: str) -> tuple[str, ...]:
    cls = {
        "vad": VadConfig,
        "features": FeatureConfig,
        "model": ModelConfig,
        "train": TrainConfig,
    }[section]
    return tuple(f.name for f in fields(cls))
