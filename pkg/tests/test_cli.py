"""
End-to-end tests of the command-line surface on the procedural fixture.
"""
import json
import logging
import math
import os
import shutil
from collections import Counter

import pandas as pd
import pytest

from config.constants import EXIT_CONFIG, EXIT_DATA, EXIT_OK
from Data.io import load_json, save_json
from features.eval_matrix import MATRIX_CELLS
from features.ganloss import GanTrainingConstants
from main import main
from utils.helpers import sha256_digest

FAST = {"train": {"epochs": 2}, "tsne": {"perplexity": 10.0, "iterations": 100}}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Fixture corpus plus a fast.json config with short training and embedding."""
    directory = tmp_path_factory.mktemp("cli_corpus")
    assert main(["make-fixture", str(directory), "--seed", "7"]) == EXIT_OK
    config = load_json(str(directory / "config.json"))
    config.update(FAST)
    save_json(config, str(directory / "fast.json"))
    return directory


def _run(corpus, out, *args):
    command, rest = args[0], list(args[1:])
    return main([command, "--config", str(corpus / "fast.json"), "--out", str(out)] + rest)


def _prepared(corpus, out):
    assert _run(corpus, out, "prepare") == EXIT_OK
    assert _run(corpus, out, "split") == EXIT_OK


def _keep_pool(directory, pool, label, keep):
    """Rewrite pool.json with only the first `keep` samples of one label."""
    ids = sorted(s["id"] for s in pool["samples"] if s["label"] == label)[:keep]
    kept = [s for s in pool["samples"] if s["label"] != label or s["id"] in ids]
    save_json({**pool, "samples": kept}, str(directory / "pool.json"))


class TestFixtureAndPrepare:
    def test_make_fixture_layout(self, corpus):
        assert (corpus / "annotations.json").is_file()
        assert (corpus / "pool.json").is_file()
        assert (corpus / "gan" / "mappings.json").is_file()
        meta = load_json(str(corpus / "run_meta" / "make-fixture.json"))
        assert meta["command"] == "make-fixture"
        assert meta["master_seed"] == 7

    def test_prepare_writes_every_image(self, corpus, tmp_path):
        assert _run(corpus, tmp_path, "prepare") == EXIT_OK
        images = os.listdir(tmp_path / "prepared" / "images")
        assert len(images) == 60
        manifest = load_json(str(tmp_path / "prepared" / "manifest.json"))
        labels = {s["label"] for s in manifest["samples"]}
        assert "rust_level_4" not in labels and "rust_level_high" in labels
        meta = load_json(str(tmp_path / "run_meta" / "prepare.json"))
        assert meta["command"] == "prepare"
        assert len(meta["config_digest"]) == 64

    def test_run_meta_keeps_resolved_config(self, corpus, tmp_path):
        assert _run(corpus, tmp_path, "prepare", "--seed", "5") == EXIT_OK
        saved = load_json(str(tmp_path / "run_meta" / "prepare.config.json"))
        assert saved["master_seed"] == 5
        assert saved["tsne"]["iterations"] == FAST["tsne"]["iterations"]
        assert saved["paths"]["output_dir"] == str(tmp_path)
        meta = load_json(str(tmp_path / "run_meta" / "prepare.json"))
        assert meta["config_digest"] == sha256_digest(saved)

    def test_missing_image_is_a_data_error(self, tmp_path):
        directory = tmp_path / "corpus"
        assert main(["make-fixture", str(directory)]) == EXIT_OK
        os.remove(directory / "images" / "healthy_003.png")
        assert main(["prepare", "--config", str(directory / "config.json")]) == EXIT_DATA

    def test_truncated_image_is_a_data_error(self, tmp_path, caplog):
        directory = tmp_path / "corpus"
        assert main(["make-fixture", str(directory)]) == EXIT_OK
        image = directory / "images" / "healthy_003.png"
        data = image.read_bytes()
        image.write_bytes(data[:len(data) // 2])
        with caplog.at_level(logging.ERROR, logger="leafaug"):
            assert main(["prepare", "--config", str(directory / "config.json")]) == EXIT_DATA
        assert "healthy_003" in caplog.text


class TestUsage:
    def test_help(self):
        assert main(["--help"]) == EXIT_OK

    def test_unknown_augmentation(self, corpus, tmp_path):
        assert _run(corpus, tmp_path, "train", "--aug", "bogus") == EXIT_CONFIG

    def test_unknown_command(self):
        assert main(["shuffle"]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["prepare", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_stage_before_its_input(self, corpus, tmp_path):
        assert _run(corpus, tmp_path, "balance") == EXIT_DATA

    def test_matrix_takes_one_augmentation(self, corpus, tmp_path):
        _prepared(corpus, tmp_path)
        assert _run(corpus, tmp_path, "eval-matrix", "--aug", "none,mixup") == EXIT_CONFIG


class TestPipeline:
    def test_full_run(self, corpus, tmp_path):
        _prepared(corpus, tmp_path)
        for command in ("balance", "resplit"):
            assert _run(corpus, tmp_path, command) == EXIT_OK

        resplit = load_json(str(tmp_path / "manifests" / "resplit.json"))["samples"]
        train_dev = [s for s in resplit if s["split"] in ("train", "dev")]
        counts = pd.Series([s["label"] for s in train_dev]).value_counts()
        assert counts.nunique() == 1
        assert not [s for s in resplit if s["split"] == "test" and s["origin"] == "synthetic"]

        assert _run(corpus, tmp_path, "train", "--aug", "none,mixup") == EXIT_OK
        report = pd.read_csv(tmp_path / "reports" / "train.csv")
        assert report["method"].tolist() == ["none", "mixup"]
        assert (tmp_path / "models" / "mixup.npz").is_file()

        csv = tmp_path / "reports" / "eval_matrix.csv"
        assert _run(corpus, tmp_path, "eval-matrix") == EXIT_OK
        first = csv.read_bytes()
        assert pd.read_csv(csv)["method"].tolist() == list(MATRIX_CELLS)
        assert _run(corpus, tmp_path, "eval-matrix") == EXIT_OK
        assert csv.read_bytes() == first
        assert set(load_json(str(tmp_path / "reports" / "eval_matrix_run.json"))) == set(MATRIX_CELLS)

    def test_pool_short_by_one_image(self, corpus, tmp_path):
        directory = tmp_path / "corpus"
        shutil.copytree(corpus, directory)
        out = tmp_path / "out"
        _prepared(directory, out)

        samples = load_json(str(out / "manifests" / "split.json"))["samples"]
        counts = Counter(s["label"] for s in samples if s["split"] != "test")
        needed = counts["healthy"] - counts["red_spider_mite"]
        pool = load_json(str(directory / "pool.json"))

        _keep_pool(directory, pool, "red_spider_mite", needed - 1)
        assert _run(directory, out, "balance") == EXIT_DATA
        assert not (out / "manifests" / "balanced.json").exists()

        _keep_pool(directory, pool, "red_spider_mite", needed)
        assert _run(directory, out, "balance") == EXIT_OK
        balanced = load_json(str(out / "manifests" / "balanced.json"))["samples"]
        train_dev = Counter(s["label"] for s in balanced if s["split"] != "test")
        assert len(set(train_dev.values())) == 1

    def test_train_into_fresh_output(self, corpus, tmp_path):
        _prepared(corpus, tmp_path)
        assert not (tmp_path / "models").exists()
        assert _run(corpus, tmp_path, "train") == EXIT_OK
        assert (tmp_path / "models" / "none.npz").is_file()
        assert pd.read_csv(tmp_path / "reports" / "train.csv")["method"].tolist() == ["none"]

    def test_same_seed_same_outputs(self, corpus, tmp_path):
        for run in ("a", "b"):
            _prepared(corpus, tmp_path / run)
        for rel in ("prepared/manifest.json", "prepared/images/healthy_000.png"):
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
        assert ((tmp_path / "a" / "manifests" / "split.json").read_bytes()
                == (tmp_path / "b" / "manifests" / "split.json").read_bytes())


class TestTsne:
    def test_embeds_prepared_manifest(self, corpus, tmp_path):
        assert _run(corpus, tmp_path, "prepare") == EXIT_OK
        assert _run(corpus, tmp_path, "tsne") == EXIT_OK
        frame = pd.read_csv(tmp_path / "embed" / "tsne.csv")
        assert list(frame.columns) == ["id", "x", "y", "label", "origin"]
        assert len(frame) == 60
        assert len(load_json(str(tmp_path / "embed" / "tsne_kl.json"))["kl_trace"]) == 100


class TestGanLoss:
    def test_identity_fixture(self, corpus, tmp_path, capsys):
        assert _run(corpus, tmp_path, "gan-loss") == EXIT_OK
        terms = json.loads(capsys.readouterr().out)
        assert terms["cycle"] == 0.0
        assert terms["identity"] == 0.0
        assert terms["pix2pix_l1"] == 0.0
        assert terms["gan_xy_generator"] == pytest.approx(math.log(2), rel=1e-8)
        assert terms["gan_xy_discriminator"] == pytest.approx(2 * math.log(2), rel=1e-8)
        saved = load_json(str(tmp_path / "gan" / "gan_loss.json"))
        assert saved["terms"] == terms
        assert saved["training_constants"] == GanTrainingConstants().to_dict()


class TestAugmentPreview:
    @pytest.mark.parametrize("aug", ["rotflip+fmix", "cutmix"])
    def test_replay_reproduces_batch(self, corpus, tmp_path, aug):
        _prepared(corpus, tmp_path)
        assert _run(corpus, tmp_path, "augment-preview", "--aug", aug) == EXIT_OK
        sidecar = tmp_path / "preview" / "event.json"
        event = load_json(str(sidecar))
        assert event["pipeline"] == aug
        assert len(event["ids"]) == 8

        assert _run(corpus, tmp_path, "augment-preview", "--replay", str(sidecar)) == EXIT_OK
        written = sorted(f for f in os.listdir(tmp_path / "preview") if f.endswith(".png"))
        replayed = sorted(os.listdir(tmp_path / "preview" / "replay"))
        assert written == replayed and len(written) == 8
        for name in written:
            assert (tmp_path / "preview" / name).read_bytes() == (tmp_path / "preview" / "replay" / name).read_bytes()
