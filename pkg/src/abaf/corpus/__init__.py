from abaf.corpus.cache import FeatureBundle, load_feature_bundle, store_feature_bundle
from abaf.corpus.manifest import (
    HAMD17_BANDS,
    PHQ9_BANDS,
    CorpusManifest,
    SubjectRecord,
    band_label,
    load_manifest,
    save_manifest,
    validate_label_consistency,
)
from abaf.corpus.synth import SynthSpec, generate_synthetic_corpus
from abaf.corpus.wav import AudioClip, read_wav, write_wav

__all__ = [
    "AudioClip",
    "CorpusManifest",
    "FeatureBundle",
    "HAMD17_BANDS",
    "PHQ9_BANDS",
    "SubjectRecord",
    "SynthSpec",
    "band_label",
    "generate_synthetic_corpus",
    "load_feature_bundle",
    "load_manifest",
    "read_wav",
    "save_manifest",
    "store_feature_bundle",
    "validate_label_consistency",
    "write_wav",
]
