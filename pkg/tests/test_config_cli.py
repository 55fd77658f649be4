"""Config parsing/round-trips and the CLI surface end to end."""

import dataclasses

import numpy as np
import pytest

from abaf.cli import run_command
from abaf.config import (
    ConfigError,
    PipelineConfig,
    apply_overrides,
    extraction_hash,
    field_names,
    load_config,
    parse_config_text,
    profile_config,
    save_config,
    to_flat,
)
from abaf.corpus.manifest import SubjectRecord, CorpusManifest, load_manifest, save_manifest
from abaf.features.hsf import HSF_DIM


class TestConfig:
    def test_desk_defaults(self):
        cfg = profile_config("desk")
        assert cfg.profile == "desk"
        assert cfg.features.side == 64
        assert cfg.features.channels == 1
        assert cfg.model.num_top_k == 64

    def test_paper_overrides(self):
        cfg = profile_config("paper")
        assert cfg.profile == "paper"
        assert cfg.features.side == 224
        assert cfg.features.channels == 3
        assert cfg.model.num_top_k == 291
        # sections not named by the profile keep their defaults
        assert cfg.train.max_epochs == PipelineConfig().train.max_epochs

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            profile_config("server")

    def test_apply_overrides_types(self):
        cfg = apply_overrides(PipelineConfig(), {
            "train.max_epochs": "7",
            "train.lr": "0.25",
            "train.fine_tune_all": "true",
        })
        assert cfg.train.max_epochs == 7
        assert cfg.train.lr == 0.25
        assert cfg.train.fine_tune_all is True

    def test_apply_overrides_rejects_unknown(self):
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"train.bogus": "1"})
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"nosection.key": "1"})
        with pytest.raises(ConfigError):
            apply_overrides(PipelineConfig(), {"train.max_epochs": "many"})

    def test_save_load_round_trip(self, tmp_path):
        cfg = apply_overrides(profile_config("paper"), {"train.lr": "0.005"})
        p = tmp_path / "run.cfg"
        save_config(cfg, p)
        again = load_config(p)
        assert again == cfg

    def test_in_file_profile_rebases(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("profile = paper\ntrain.max_epochs = 3\n")
        cfg = load_config(p)
        assert cfg.features.side == 224
        assert cfg.train.max_epochs == 3

    def test_parse_config_text(self):
        text = "# comment\n\ntrain.lr = 0.1\n  model.embed_dim=256  \n"
        assert parse_config_text(text) == {
            "train.lr": "0.1", "model.embed_dim": "256",
        }
        with pytest.raises(ConfigError):
            parse_config_text("not a key value line")

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.cfg")

    def test_extraction_hash_scope(self):
        base = profile_config("desk")
        assert len(extraction_hash(base)) == 16
        int(extraction_hash(base), 16)  # hex digest
        # training and model settings do not touch extracted features
        trained = apply_overrides(base, {"train.max_epochs": "999"})
        modeled = apply_overrides(base, {"model.embed_dim": "64"})
        assert extraction_hash(trained) == extraction_hash(base)
        assert extraction_hash(modeled) == extraction_hash(base)
        # vad and feature settings do
        vad = apply_overrides(base, {"vad.frame_ms": "30"})
        feat = apply_overrides(base, {"features.side": "32"})
        assert extraction_hash(vad) != extraction_hash(base)
        assert extraction_hash(feat) != extraction_hash(base)

    def test_extraction_hash_stable_value(self):
        # same config hashes the same across processes and runs
        a = extraction_hash(profile_config("desk"))
        b = extraction_hash(profile_config("desk"))
        assert a == b

    def test_to_flat_covers_all_sections(self):
        flat = to_flat(PipelineConfig())
        assert flat["profile"] == "desk"
        for section in ("vad", "features", "model", "train"):
            assert any(k.startswith(f"{section}.") for k in flat)

    def test_field_names(self):
        assert "frame_ms" in field_names("vad")
        assert "side" in field_names("features")
        assert "embed_dim" in field_names("model")
        assert "val_frac" in field_names("train")
        with pytest.raises(KeyError):
            field_names("nope")


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    """A small synth corpus plus its extracted cache and a fast config file."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    cache = root / "cache"
    rc = run_command([
        "synth", "--n", "6", "--duration", "1.0", "--seed", "3",
        "--out", str(corpus),
    ])
    assert rc == 0
    rc = run_command([
        "extract", "--manifest", str(corpus / "manifest.csv"),
        "--out", str(cache), "--jobs", "2",
    ])
    assert rc == 0
    fast_cfg = root / "fast.cfg"
    fast_cfg.write_text(
        "train.max_epochs = 1\ntrain.patience = 1\ntrain.batch_size = 4\n"
    )
    return {"root": root, "corpus": corpus, "cache": cache, "cfg": str(fast_cfg)}


class TestCliPipeline:
    def test_synth_outputs(self, cli_corpus):
        corpus = cli_corpus["corpus"]
        wavs = sorted(corpus.glob("*.wav"))
        assert len(wavs) == 12
        manifest = load_manifest(corpus / "manifest.csv")
        labels = [r.label for r in manifest.records]
        assert labels.count(0) == 6 and labels.count(1) == 6

    def test_extract_cache_contents(self, cli_corpus):
        cache = cli_corpus["cache"]
        assert (cache / "manifest.csv").exists()
        feats = list(cache.glob("*.feat"))
        assert len(feats) == 12
        lines = (cache / "hsf.csv").read_text().strip().split("\n")
        assert len(lines) == 13
        header = lines[0].split(",")
        assert header[0] == "subject_id"
        assert len(header) == 1 + HSF_DIM
        row = lines[1].split(",")
        assert row[0] == "s0000"
        vals = np.array([float(v) for v in row[1:]])
        assert np.isfinite(vals).all()

    def test_extract_is_incremental(self, cli_corpus, capsys):
        rc = run_command([
            "extract", "--manifest", str(cli_corpus["corpus"] / "manifest.csv"),
            "--out", str(cli_corpus["cache"]),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "0 computed, 12 cached" in out
        assert "config hash" in out

    def test_train_single(self, cli_corpus, tmp_path):
        out = tmp_path / "single"
        rc = run_command([
            "train-single", "--cache", str(cli_corpus["cache"]),
            "--feature", "hsf", "--folds", "2", "--seed", "0",
            "--config", cli_corpus["cfg"], "--out", str(out),
        ])
        assert rc == 0
        for name in ("report.csv", "report.json", "roc.svg", "pr.svg",
                     "confusion.svg", "fold1/hsf.ckpt", "fold2/hsf.ckpt"):
            assert (out / name).exists(), name

    def test_train_fusion(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "fusion"
        rc = run_command([
            "train-fusion", "--cache", str(cli_corpus["cache"]),
            "--folds", "2", "--seed", "0",
            "--config", cli_corpus["cfg"], "--out", str(out),
        ])
        assert rc == 0
        assert "train-fusion: acc" in capsys.readouterr().out
        assert (out / "report.csv").exists()
        assert (out / "fold1" / "fusion.ckpt").exists()
        header = (out / "report.csv").read_text().split("\n")[0]
        for s in ("envelope", "spectrogram", "mel", "hsf"):
            assert f"w_{s}" in header

    def test_ablate_single_exclusion(self, cli_corpus, tmp_path):
        out = tmp_path / "abl"
        rc = run_command([
            "ablate", "--cache", str(cli_corpus["cache"]),
            "--exclude", "mel", "--folds", "2", "--seed", "0",
            "--config", cli_corpus["cfg"], "--out", str(out),
        ])
        assert rc == 0
        assert (out / "no_mel" / "report.csv").exists()

    def test_analyze(self, cli_corpus, tmp_path, capsys):
        out = tmp_path / "ana"
        rc = run_command([
            "analyze", "--cache", str(cli_corpus["cache"]),
            "--filter", "p", "--alpha", "0.5", "--trees", "10",
            "--seed", "0", "--out", str(out),
        ])
        assert rc == 0
        report = out / "feature_report.csv"
        if report.exists():
            first = report.read_text().split("\n")[0]
            assert first == "FeatureName,t,FDR,RF_Score,Category"
        else:
            assert "no features pass" in capsys.readouterr().out

    def test_sweep_and_subtype_need_scores(self, cli_corpus, tmp_path, capsys):
        rc = run_command([
            "sweep", "--cache", str(cli_corpus["cache"]),
            "--thresholds", "10", "--folds", "2", "--seed", "0",
            "--config", cli_corpus["cfg"], "--out", str(tmp_path / "sw"),
        ])
        assert rc == 1
        assert "scale_score missing" in capsys.readouterr().err

    def test_sweep_with_scored_manifest(self, cli_corpus, tmp_path):
        # rewrite the cached manifest with phq9 scores so sweep has a scale
        cache = cli_corpus["cache"]
        manifest = load_manifest(cache / "manifest.csv")
        scored = CorpusManifest([
            dataclasses.replace(r, scale_score=15 if r.label else 2,
                                scale_kind="phq9")
            for r in manifest.records
        ])
        scored_dir = tmp_path / "scored_cache"
        scored_dir.mkdir()
        for f in cache.glob("*.feat"):
            (scored_dir / f.name).write_bytes(f.read_bytes())
        save_manifest(scored, scored_dir / "manifest.csv")

        out = tmp_path / "sw"
        rc = run_command([
            "sweep", "--cache", str(scored_dir), "--thresholds", "10",
            "--folds", "2", "--seed", "0", "--config", cli_corpus["cfg"],
            "--out", str(out),
        ])
        assert rc == 0
        assert (out / "t10" / "report.csv").exists()

        sub_out = tmp_path / "sub"
        rc = run_command([
            "subtype", "--cache", str(scored_dir), "--scale", "phq9",
            "--pairs", "Minimal:ModeratelySevere", "--repeats", "1",
            "--folds", "2", "--seed", "0", "--config", cli_corpus["cfg"],
            "--out", str(sub_out),
        ])
        assert rc == 0
        pair_dir = sub_out / "Minimal_vs_ModeratelySevere"
        assert (pair_dir / "rep0.csv").exists()
        assert (pair_dir / "summary.json").exists()


class TestCliErrors:
    def test_missing_cache_is_exit_one(self, tmp_path, capsys):
        rc = run_command([
            "train-fusion", "--cache", str(tmp_path / "nowhere"),
            "--folds", "2", "--out", str(tmp_path / "out"),
        ])
        assert rc == 1
        assert "manifest not found" in capsys.readouterr().err

    def test_stale_cache_names_extract(self, cli_corpus, tmp_path, capsys):
        # a different vad config hashes differently, so bundles are missing
        stale_cfg = tmp_path / "stale.cfg"
        stale_cfg.write_text("vad.frame_ms = 30\n")
        rc = run_command([
            "train-single", "--cache", str(cli_corpus["cache"]),
            "--feature", "hsf", "--folds", "2",
            "--config", str(stale_cfg), "--out", str(tmp_path / "out"),
        ])
        assert rc == 1
        assert "run extract first" in capsys.readouterr().err

    def test_missing_manifest_is_exit_one(self, tmp_path, capsys):
        rc = run_command([
            "extract", "--manifest", str(tmp_path / "no.csv"),
            "--out", str(tmp_path / "cache"),
        ])
        assert rc == 1
        assert "manifest not found" in capsys.readouterr().err

    def test_usage_errors_exit_two(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            run_command(["synth", "--out", str(tmp_path), "--bogus-flag"])
        assert e.value.code == 2
        with pytest.raises(SystemExit) as e:
            run_command(["not-a-command"])
        assert e.value.code == 2
        with pytest.raises(SystemExit) as e:
            run_command([])
        assert e.value.code == 2

    def test_bad_config_file_is_exit_one(self, cli_corpus, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("train.nonexistent = 1\n")
        rc = run_command([
            "train-single", "--cache", str(cli_corpus["cache"]),
            "--feature", "hsf", "--folds", "2",
            "--config", str(bad), "--out", str(tmp_path / "out"),
        ])
        assert rc == 1
        assert "unknown config key" in capsys.readouterr().err


class TestCliSeeding:
    def test_env_seed_matches_explicit_flag(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("ABAF_SEED", "11")
        assert run_command(["synth", "--n", "1", "--duration", "0.5",
                            "--out", str(a)]) == 0
        monkeypatch.delenv("ABAF_SEED")
        assert run_command(["synth", "--n", "1", "--duration", "0.5",
                            "--seed", "11", "--out", str(b)]) == 0
        assert (a / "s0000.wav").read_bytes() == (b / "s0000.wav").read_bytes()
        assert (a / "manifest.csv").read_bytes() == (b / "manifest.csv").read_bytes()

    def test_invalid_env_seed_is_exit_one(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ABAF_SEED", "eleven")
        rc = run_command(["synth", "--n", "1", "--duration", "0.5",
                          "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "ABAF_SEED" in capsys.readouterr().err

    def test_seed_changes_synth_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_command(["synth", "--n", "1", "--duration", "0.5", "--seed", "1",
                     "--out", str(a)])
        run_command(["synth", "--n", "1", "--duration", "0.5", "--seed", "2",
                     "--out", str(b)])
        assert (a / "s0000.wav").read_bytes() != (b / "s0000.wav").read_bytes()
