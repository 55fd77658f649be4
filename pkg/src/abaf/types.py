"""Shared value types passed between pipeline stages."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Contour:
    """A frame-level time series (STE, ZCR, an LLD row, an envelope)."""

    values: np.ndarray
    frame_rate: float  # frames per second

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SpectroMatrix:
    """bins x frames matrix on a linear-Hz or mel bin axis."""

    data: np.ndarray
    bin_axis: str  # "linear_hz" | "mel" | "cepstral"
    log_scaled: bool = False


@dataclass
class MelFilterbank:
    weights: np.ndarray  # n_mels x (n_fft // 2 + 1)
    f_min: float
    f_max: float
    apex_hz: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class FeatureImage:
    pixels: np.ndarray  # (C, H, W), values in [0, 1]
    kind: str  # "envelope" | "spectrogram" | "mel"


@dataclass
class HsfVector:
    values: np.ndarray
    names: list

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class VadSegments:
    """Non-overlapping, sorted (start, end) sample ranges of detected speech."""

    segments: list  # list of (n_start, n_end)

    def __len__(self) -> int:
        return len(self.segments)

    def total_samples(self) -> int:
        return sum(e - s for s, e in self.segments)


@dataclass
class Metrics:
    """Binary classification metrics; positive class is label 1 (depression).

    roc_auc / pr_auc are None when y_true holds a single class. flags names
    any quantity whose denominator was zero and therefore reported as 0.
    """

    acc: float
    precision: float
    recall: float
    f1: float
    macro_avg_f1: float
    weighted_avg_f1: float
    roc_auc: Optional[float]
    pr_auc: Optional[float]
    confusion: np.ndarray  # 2x2, rows = true (0,1), cols = predicted (0,1)
    flags: tuple = ()
