from abaf.features.extract import extract_bundle, extract_corpus, load_corpus_bundles
from abaf.features.functionals import FUNCTIONAL_NAMES, apply_functionals, delta
from abaf.features.hsf import VARIANTS, assemble_hsf, hsf_feature_names, select_top_k
from abaf.features.images import bilinear_resize, rasterize, upper_envelope
from abaf.features.llds import LLD_NAMES, LldConfig, compute_llds
from abaf.features.spectral import (
    hz_to_mel,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    mfcc,
    stft_spectrogram,
)

__all__ = [
    "FUNCTIONAL_NAMES",
    "LLD_NAMES",
    "LldConfig",
    "VARIANTS",
    "apply_functionals",
    "assemble_hsf",
    "bilinear_resize",
    "compute_llds",
    "delta",
    "extract_bundle",
    "extract_corpus",
    "load_corpus_bundles",
    "hsf_feature_names",
    "hz_to_mel",
    "mel_filterbank",
    "mel_spectrogram",
    "mel_to_hz",
    "mfcc",
    "rasterize",
    "select_top_k",
    "stft_spectrogram",
    "upper_envelope",
]
