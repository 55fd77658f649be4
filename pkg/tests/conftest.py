import numpy as np
import pytest

from abaf.config import profile_config
from abaf.corpus.synth import SynthSpec, generate_synthetic_corpus
from abaf.features.extract import extract_corpus


@pytest.fixture(scope="session")
def planted_corpus(tmp_path_factory):
    """Small two-class corpus with a planted class difference, pre-extracted.

    Session-scoped: extraction dominates test time, so every test that just
    needs real feature bundles shares this one.
    """
    root = tmp_path_factory.mktemp("planted")
    spec = SynthSpec(
        n_per_class=8,
        duration_s=2.0,
        class1_pitch_shift=-30.0,
        class1_tilt_db=-3.0,
        class1_tempo_factor=0.85,
    )
    manifest = generate_synthetic_corpus(spec, seed=11, out_dir=root)
    cfg = profile_config("desk")
    cache = root / "cache"
    bundles, n_computed = extract_corpus(manifest, root, cache, cfg, jobs=2)
    assert n_computed == len(manifest)
    labels = np.asarray(manifest.labels())
    return {
        "root": root,
        "cache": cache,
        "manifest": manifest,
        "bundles": bundles,
        "labels": labels,
        "cfg": cfg,
    }
