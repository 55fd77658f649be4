"""Acoustic feature fusion pipeline: preprocessing, four-feature extraction,
attention-based sub-models, score-weighted late fusion, and the evaluation
harness around them.
"""

__version__ = "0.1.0"

from abaf.errors import AbafError, ManifestError, VadError, WavFormatError

__all__ = [
    "AbafError",
    "ManifestError",
    "VadError",
    "WavFormatError",
    "__version__",
]
