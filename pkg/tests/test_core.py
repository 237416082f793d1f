"""
Tests for domain types, manifest I/O, seeded streams and helpers.
"""
import json
import os

import numpy as np
import pytest

from config.constants import MANIFEST_SCHEMA_VERSION
from Data.io import (
    export_to_csv, load_json, load_manifest, manifest_to_dict, read_features_csv, read_png, save_json, save_manifest,
    to_uint8, write_png,
)
from Data.types import (
    ClassLabel, DatasetManifest, LabeledSample, Origin, PolygonMask, Split, as_image, check_soft_labels, one_hot,
    soft_label,
)
from utils.errors import (
    DataError, DuplicateIdError, InvariantError, ManifestError, MissingImageError, SchemaError,
)
from utils.helpers import canonical_json, format_percentage, sha256_digest, to_significant
from utils.rng import RngStream, derive_stream, first_draws, stage_stream, stream_id_for

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def _write_manifest(path, samples):
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"schema_version": MANIFEST_SCHEMA_VERSION, "samples": samples}, f)


def _raw(sample_id, **overrides):
    raw = {"id": sample_id, "image_path": f"{sample_id}.png", "label": "healthy", "mask": None,
           "origin": "real", "split": None}
    raw.update(overrides)
    return raw


class TestClassLabel:
    def test_five_classes_with_stable_indices(self):
        assert [c.value for c in ClassLabel] == [
            "healthy", "red_spider_mite", "rust_level_low", "rust_level_medium", "rust_level_high",
        ]
        for i, label in enumerate(ClassLabel):
            assert label.index == i
            assert ClassLabel.from_index(i) is label

    def test_from_index_out_of_range(self):
        with pytest.raises(ValueError):
            ClassLabel.from_index(5)

    def test_diseased_excludes_healthy(self):
        assert ClassLabel.HEALTHY not in ClassLabel.diseased()
        assert len(ClassLabel.diseased()) == 4


class TestValueTypes:
    def test_soft_label_must_sum_to_one(self):
        assert soft_label([0.2] * 5).sum() == pytest.approx(1.0)
        with pytest.raises(ValueError):
            soft_label([0.5, 0.5, 0.5, 0.0, 0.0])

    def test_check_soft_labels_names_row(self):
        labels = np.stack([one_hot(ClassLabel.HEALTHY), np.full(5, 0.3)])
        with pytest.raises(ValueError, match="row 1"):
            check_soft_labels(labels)

    def test_image_values_checked(self):
        assert as_image(np.zeros((4, 5))).shape == (4, 5, 1)
        with pytest.raises(ValueError):
            as_image(np.full((2, 2, 3), 1.5))

    def test_synthetic_test_sample_rejected(self):
        sample = LabeledSample("a", "a.png", ClassLabel.RUST_LEVEL_LOW, origin=Origin.SYNTHETIC, split=Split.TEST)
        with pytest.raises(InvariantError):
            DatasetManifest((sample,))

    def test_manifest_sorted_by_id(self):
        samples = tuple(LabeledSample(i, f"{i}.png", ClassLabel.HEALTHY) for i in ("c", "a", "b"))
        assert DatasetManifest(samples).ids() == ["a", "b", "c"]


class TestManifestIO:
    def test_load_valid_manifest(self, tmp_path):
        for name in ("a", "b", "c"):
            (tmp_path / f"{name}.png").write_bytes(b"")
        _write_manifest(tmp_path / "m.json", [_raw("a"), _raw("b"), _raw("c", mask=[[0, 0], [4, 0], [0, 4]])])
        manifest = load_manifest(str(tmp_path / "m.json"))
        assert len(manifest) == 3
        assert manifest.samples[2].mask == PolygonMask(((0, 0), (4, 0), (0, 4)))

    def test_duplicate_id(self, tmp_path):
        _write_manifest(tmp_path / "m.json", [_raw("a"), _raw("a")])
        with pytest.raises(DuplicateIdError):
            load_manifest(str(tmp_path / "m.json"), check_files=False)

    def test_synthetic_in_test_split(self, tmp_path):
        _write_manifest(tmp_path / "m.json", [_raw("a", origin="synthetic", split="test")])
        with pytest.raises(InvariantError):
            load_manifest(str(tmp_path / "m.json"), check_files=False)

    @pytest.mark.parametrize("field, value", [
        ("label", "rust_level_9"),
        ("origin", "generated"),
        ("split", "validation"),
        ("mask", [[0, 0], [1, 1]]),
    ])
    def test_schema_error_names_field(self, tmp_path, field, value):
        _write_manifest(tmp_path / "m.json", [_raw("a", **{field: value})])
        with pytest.raises(SchemaError) as info:
            load_manifest(str(tmp_path / "m.json"), check_files=False)
        assert info.value.field == field

    def test_missing_and_extra_fields(self, tmp_path):
        raw = _raw("a")
        del raw["mask"]
        _write_manifest(tmp_path / "m.json", [raw])
        with pytest.raises(SchemaError) as info:
            load_manifest(str(tmp_path / "m.json"), check_files=False)
        assert info.value.field == "mask"

        _write_manifest(tmp_path / "m.json", [_raw("a", extra=1)])
        with pytest.raises(SchemaError) as info:
            load_manifest(str(tmp_path / "m.json"), check_files=False)
        assert info.value.field == "extra"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(str(tmp_path / "absent.json"))

    def test_missing_image_names_sample(self, tmp_path):
        _write_manifest(tmp_path / "m.json", [_raw("leaf_7")])
        with pytest.raises(MissingImageError) as info:
            load_manifest(str(tmp_path / "m.json"))
        assert info.value.sample_id == "leaf_7"

    def test_round_trip(self, tmp_path, small_manifest):
        path = str(tmp_path / "m.json")
        save_manifest(small_manifest, path)
        assert load_manifest(path, check_files=False) == small_manifest

    def test_round_trip_is_byte_stable(self, tmp_path, small_manifest):
        first, second = str(tmp_path / "1.json"), str(tmp_path / "2.json")
        save_manifest(small_manifest, first)
        save_manifest(load_manifest(first, check_files=False), second)
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()

    def test_empty_manifest(self, tmp_path):
        path = str(tmp_path / "empty.json")
        save_manifest(DatasetManifest(), path)
        assert len(load_manifest(path)) == 0

    def test_random_manifests_round_trip(self, tmp_path):
        stream = derive_stream(3, 0)
        for k in range(100):
            n = int(stream.integers(0, 8))
            samples = []
            for i in range(n):
                origin = Origin.SYNTHETIC if stream.random() < 0.3 else Origin.REAL
                splits = [None, Split.TRAIN, Split.DEV] + ([Split.TEST] if origin is Origin.REAL else [])
                mask = None
                if stream.random() < 0.5:
                    mask = PolygonMask(tuple((float(x), float(y)) for x, y in stream.uniform(0, 64, size=(3, 2))))
                samples.append(LabeledSample(
                    f"s{k}_{i}", f"img/{i}.png", ClassLabel.from_index(int(stream.integers(0, 5))),
                    mask=mask, origin=origin, split=splits[int(stream.integers(0, len(splits)))],
                ))
            manifest = DatasetManifest(tuple(samples))
            path = str(tmp_path / f"{k}.json")
            save_manifest(manifest, path)
            assert load_manifest(path, check_files=False) == manifest

    def test_manifest_dict_layout(self, small_manifest):
        data = manifest_to_dict(small_manifest)
        assert set(data) == {"schema_version", "samples"}
        assert set(data["samples"][0]) == {"id", "image_path", "label", "mask", "origin", "split"}


class TestImagesAndTables:
    def test_png_round_trip_quantizes(self, tmp_path):
        img = np.linspace(0, 1, 4 * 4 * 3).reshape(4, 4, 3)
        path = str(tmp_path / "x.png")
        write_png(path, img)
        back = read_png(path)
        assert back.shape == (4, 4, 3)
        assert np.array_equal(to_uint8(back), to_uint8(img))

    def test_to_uint8_rounds_half_up(self):
        assert to_uint8(np.array([0.0, 0.5, 1.0])).tolist() == [0, 128, 255]

    def test_truncated_png_names_sample(self, tmp_path):
        path = tmp_path / "leaf.png"
        write_png(str(path), derive_stream(3, 0).random(size=(32, 32, 3)))
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(DataError, match="leaf_007"):
            read_png(str(path), "leaf_007")

    def test_non_png_file(self, tmp_path):
        path = tmp_path / "notes.png"
        path.write_text("not an image", encoding="utf-8")
        with pytest.raises(DataError, match="unreadable"):
            read_png(str(path))

    def test_missing_png_names_sample(self, tmp_path):
        with pytest.raises(MissingImageError) as info:
            read_png(str(tmp_path / "gone.png"), "leaf_001")
        assert info.value.sample_id == "leaf_001"

    def test_csv_export_and_feature_import(self, tmp_path):
        path = str(tmp_path / "f.csv")
        export_to_csv([{"id": "a", "f0": 0.5, "f1": 1.0}, {"id": "b", "f0": 2.0, "f1": 3.0}], path, ("id", "f0", "f1"))
        ids, feats = read_features_csv(path)
        assert ids == ["a", "b"]
        assert feats.tolist() == [[0.5, 1.0], [2.0, 3.0]]

    def test_feature_columns_validated(self, tmp_path):
        path = str(tmp_path / "f.csv")
        export_to_csv([{"id": "a", "f1": 0.5}], path, ("id", "f1"))
        with pytest.raises(SchemaError):
            read_features_csv(path)

    def test_save_json_is_sorted(self, tmp_path):
        path = str(tmp_path / "x.json")
        save_json({"b": 1, "a": 2}, path)
        with open(path, encoding="utf-8") as f:
            assert f.read() == '{\n  "a": 2,\n  "b": 1\n}\n'


class TestRng:
    def test_same_stream_same_draws(self):
        assert first_draws(derive_stream(42, 0), 100) == first_draws(derive_stream(42, 0), 100)

    def test_distinct_stream_ids_differ(self):
        assert first_draws(derive_stream(42, 0)) != first_draws(derive_stream(42, 1))

    def test_streams_do_not_interfere(self):
        expected = first_draws(derive_stream(42, 7))
        other = derive_stream(42, 3)
        stream = derive_stream(42, 7)
        other.random(50)
        assert first_draws(stream) == expected

    def test_matches_golden_draws(self):
        golden = load_json(os.path.join(DATA_DIR, "rng_golden_42_7.json"))
        stream = derive_stream(golden["master_seed"], golden["stream_id"])
        assert list(first_draws(stream, len(golden["draws"]))) == golden["draws"]

    def test_stage_ids_are_stable_and_distinct(self):
        assert stream_id_for("split") == stream_id_for("split")
        assert stream_id_for("train", 0) != stream_id_for("train", 1)
        assert 0 <= stream_id_for("train", 3, 4) < 2 ** 64
        assert first_draws(stage_stream(1, "train", 2)) == first_draws(derive_stream(1, stream_id_for("train", 2)))

    @pytest.mark.parametrize("seed", [-1, 2 ** 64, 1.5])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError):
            RngStream(seed, 0)


class TestHelpers:
    def test_format_percentage(self):
        assert format_percentage(96.94) == "96.9"
        assert format_percentage(100) == "100.0"

    def test_to_significant(self):
        assert to_significant(1.23456789012) == 1.23456789
        assert to_significant(0.0) == 0.0

    def test_digest_uses_canonical_json(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
        assert sha256_digest({"a": 1, "b": 2}) == sha256_digest({"b": 2, "a": 1})

    def test_load_json_errors_are_data_errors(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(DataError):
            load_json(str(path))
        with pytest.raises(DataError):
            load_json(str(tmp_path / "absent.json"))
