"""WAV I/O, manifest parsing, severity bands, synthesis, feature cache."""

import struct

import numpy as np
import pytest

from abaf.corpus.cache import (
    CacheFormatError,
    FeatureBundle,
    load_feature_bundle,
    store_feature_bundle,
)
from abaf.corpus.manifest import (
    CorpusManifest,
    SubjectRecord,
    band_label,
    load_manifest,
    save_manifest,
)
from abaf.corpus.synth import SynthSpec, generate_synthetic_corpus
from abaf.corpus.wav import AudioClip, read_wav, write_wav
from abaf.errors import ManifestError, WavFormatError


class TestWav:
    def test_round_trip_exact_for_quantized_values(self, tmp_path):
        rng = np.random.default_rng(0)
        q = rng.integers(-32768, 32768, size=1000).astype(np.float64) / 32768.0
        p = tmp_path / "a.wav"
        write_wav(p, q, 16000)
        clip = read_wav(p)
        assert clip.sample_rate == 16000
        np.testing.assert_array_equal(clip.samples, q)

    def test_round_trip_error_bounded_by_half_lsb(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.9, 0.9, size=500)
        p = tmp_path / "b.wav"
        write_wav(p, x, 8000)
        back = read_wav(p).samples
        assert np.max(np.abs(back - x)) <= 0.5 / 32768.0 + 1e-12

    def test_out_of_range_samples_clip(self, tmp_path):
        p = tmp_path / "c.wav"
        write_wav(p, np.array([2.0, -2.0, 1.0, -1.0]), 16000)
        back = read_wav(p).samples
        assert back[0] == back[2] == 32767.0 / 32768.0
        assert back[1] == back[3] == -1.0

    def test_stereo_downmix(self, tmp_path):
        left = np.array([1000, 2000, 3000], dtype="<i2")
        right = np.array([3000, 2000, 1000], dtype="<i2")
        inter = np.empty(6, dtype="<i2")
        inter[0::2] = left
        inter[1::2] = right
        body = inter.tobytes()
        hdr = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
        hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 2, 16000, 64000, 4, 16)
        hdr += b"data" + struct.pack("<I", len(body))
        p = tmp_path / "st.wav"
        p.write_bytes(hdr + body)
        clip = read_wav(p)
        np.testing.assert_allclose(clip.samples, [2000 / 32768] * 3)

    def test_rejects_non_riff(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"OggS" + b"\x00" * 40)
        with pytest.raises(WavFormatError):
            read_wav(p)

    def test_rejects_wrong_bit_depth(self, tmp_path):
        hdr = b"RIFF" + struct.pack("<I", 36) + b"WAVE"
        hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 16000, 32000, 1, 8)
        hdr += b"data" + struct.pack("<I", 0)
        p = tmp_path / "bad8.wav"
        p.write_bytes(hdr)
        with pytest.raises(WavFormatError):
            read_wav(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")

    def test_duration(self):
        clip = AudioClip(np.zeros(8000), 16000)
        assert clip.duration_s == 0.5


class TestManifest:
    def test_band_label_hamd17(self):
        assert band_label("hamd17", 0) == "NC"
        assert band_label("hamd17", 7) == "NC"
        assert band_label("hamd17", 8) == "Mild"
        assert band_label("hamd17", 16) == "Mild"
        assert band_label("hamd17", 17) == "Moderate"
        assert band_label("hamd17", 24) == "Moderate"
        assert band_label("hamd17", 25) == "Severe"
        assert band_label("hamd17", 52) == "Severe"

    def test_band_label_phq9(self):
        assert band_label("phq9", 0) == "NC"
        assert band_label("phq9", 3) == "Minimal"
        assert band_label("phq9", 7) == "Mild"
        assert band_label("phq9", 12) == "Moderate"
        assert band_label("phq9", 17) == "ModeratelySevere"
        assert band_label("phq9", 27) == "Severe"

    def test_band_label_out_of_range(self):
        with pytest.raises(ManifestError):
            band_label("hamd17", 53)
        with pytest.raises(ManifestError):
            band_label("nonsense", 5)

    def test_save_load_round_trip(self, tmp_path):
        man = CorpusManifest(
            records=[
                SubjectRecord("s001", "wavs/s001.wav", 0, 3, "hamd17"),
                SubjectRecord("s002", "wavs/s002.wav", 1, 21, "hamd17"),
            ]
        )
        p = tmp_path / "manifest.csv"
        save_manifest(man, p)
        back = load_manifest(p)
        assert back.records == man.records
        assert back.ids() == ["s001", "s002"]
        assert back.labels() == [0, 1]

    def test_load_rejects_bad_label(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "subject_id,wav_path,label,scale_score,scale_kind\n"
            "s1,a.wav,2,3,hamd17\n"
        )
        with pytest.raises(ManifestError):
            load_manifest(p)

    def test_load_rejects_duplicate_ids(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text(
            "subject_id,wav_path,label,scale_score,scale_kind\n"
            "s1,a.wav,0,3,hamd17\n"
            "s1,b.wav,1,20,hamd17\n"
        )
        with pytest.raises(ManifestError):
            load_manifest(p)

    def test_by_id(self):
        man = CorpusManifest(records=[SubjectRecord("x", "x.wav", 1, 20, "hamd17")])
        assert man.by_id("x").label == 1
        with pytest.raises(KeyError):
            man.by_id("y")


class TestSynth:
    def test_deterministic_and_class_dependent(self, tmp_path):
        spec = SynthSpec(n_per_class=2, duration_s=1.0)
        m1 = generate_synthetic_corpus(spec, seed=5, out_dir=tmp_path / "a")
        m2 = generate_synthetic_corpus(spec, seed=5, out_dir=tmp_path / "b")
        for r1, r2 in zip(m1.records, m2.records):
            w1 = (tmp_path / "a" / r1.wav_path).read_bytes()
            w2 = (tmp_path / "b" / r2.wav_path).read_bytes()
            assert w1 == w2

        m3 = generate_synthetic_corpus(spec, seed=6, out_dir=tmp_path / "c")
        w1 = (tmp_path / "a" / m1.records[0].wav_path).read_bytes()
        w3 = (tmp_path / "c" / m3.records[0].wav_path).read_bytes()
        assert w1 != w3

    def test_manifest_written_and_balanced(self, tmp_path):
        spec = SynthSpec(n_per_class=3, duration_s=0.8)
        man = generate_synthetic_corpus(spec, seed=0, out_dir=tmp_path)
        assert len(man) == 6
        labels = man.labels()
        assert labels.count(0) == labels.count(1) == 3
        reloaded = load_manifest(tmp_path / "manifest.csv")
        assert reloaded.records == man.records
        for rec in man.records:
            clip = read_wav(tmp_path / rec.wav_path)
            assert clip.sample_rate == spec.sample_rate
            assert np.max(np.abs(clip.samples)) > 0.1


def _dummy_bundle(seed: int) -> FeatureBundle:
    rng = np.random.default_rng(seed)
    return FeatureBundle(
        envelope_image=rng.uniform(size=(1, 8, 8)),
        spectrogram_image=rng.uniform(size=(1, 8, 8)),
        mel_image=rng.uniform(size=(1, 8, 8)),
        hsf=rng.normal(size=40),
    )


class TestCache:
    def test_round_trip(self, tmp_path):
        b = _dummy_bundle(3)
        store_feature_bundle(tmp_path, "subj", "deadbeef" * 8, b)
        back = load_feature_bundle(tmp_path, "subj", "deadbeef" * 8)
        for name, arr in b.arrays().items():
            np.testing.assert_array_equal(getattr(back, name), arr)

    def test_miss_returns_none(self, tmp_path):
        assert load_feature_bundle(tmp_path, "subj", "a" * 64) is None

    def test_hash_mismatch_is_a_miss(self, tmp_path):
        b = _dummy_bundle(4)
        h1 = "a" * 64
        store_feature_bundle(tmp_path, "subj", h1, b)
        assert load_feature_bundle(tmp_path, "subj", "b" * 64) is None
        assert load_feature_bundle(tmp_path, "subj", h1) is not None

    def test_corrupt_magic_raises(self, tmp_path):
        b = _dummy_bundle(5)
        path = store_feature_bundle(tmp_path, "s", "c" * 64, b)
        raw = bytearray(open(path, "rb").read())
        raw[:4] = b"XXXX"
        open(path, "wb").write(bytes(raw))
        with pytest.raises(CacheFormatError):
            load_feature_bundle(tmp_path, "s", "c" * 64)

    def test_overwrite_replaces(self, tmp_path):
        h = "d" * 64
        store_feature_bundle(tmp_path, "s", h, _dummy_bundle(6))
        b2 = _dummy_bundle(7)
        store_feature_bundle(tmp_path, "s", h, b2)
        back = load_feature_bundle(tmp_path, "s", h)
        np.testing.assert_array_equal(back.hsf, b2.hsf)
