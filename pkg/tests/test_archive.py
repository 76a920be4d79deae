import json

import numpy as np
import pytest

from featiq.archive import (
    ArchiveManifest,
    LayerDescriptor,
    as_feature_map,
    payload_path,
    read_archive,
    validate_archive,
    validate_manifest,
    write_archive,
)
from featiq.errors import ArchiveError

from conftest import make_archive, random_map


def simple_manifest(shape=(2, 2, 1), images=("img0",)):
    return ArchiveManifest(
        model_id="m",
        preprocessing_note="none",
        layers=[LayerDescriptor("input", 0, shape)],
        images=[(i, f"{i}.png") for i in images],
    )


class TestFeatureMapInvariants:
    def test_accepts_hwc(self):
        arr = as_feature_map(np.zeros((2, 3, 4), dtype=np.float32))
        assert arr.shape == (2, 3, 4) and arr.dtype == np.float32

    def test_reshapes_flat_values(self):
        arr = as_feature_map([1, 2, 3, 4], shape=(2, 2, 1))
        assert arr[1, 0, 0] == 3.0

    def test_rejects_wrong_count(self):
        with pytest.raises(ValueError):
            as_feature_map([1, 2, 3], shape=(2, 2, 1))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_feature_map([1, np.nan, 3, 4], shape=(2, 2, 1))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            as_feature_map(np.zeros((2, 2)))


class TestManifestValidation:
    def test_valid_manifest_no_violations(self):
        assert validate_manifest(simple_manifest()) == []

    def test_duplicate_image_id(self):
        manifest = simple_manifest(images=("a", "a"))
        violations = validate_manifest(manifest)
        assert len(violations) == 1
        assert "a" in violations[0] and "duplicate" in violations[0]

    def test_duplicate_layer_index_single_violation(self):
        manifest = simple_manifest()
        manifest.layers = [
            LayerDescriptor("input", 0, (2, 2, 1)),
            LayerDescriptor("a", 2, (2, 2, 1)),
            LayerDescriptor("b", 2, (2, 2, 1)),
        ]
        violations = validate_manifest(manifest)
        assert len(violations) == 1
        assert "duplicate layer index 2" in violations[0]

    def test_missing_input_layer(self):
        manifest = simple_manifest()
        manifest.layers = [LayerDescriptor("conv1", 0, (2, 2, 1))]
        assert any('"input" is missing' in v for v in validate_manifest(manifest))

    def test_input_must_be_index_zero(self):
        manifest = simple_manifest()
        manifest.layers = [
            LayerDescriptor("conv1", 0, (2, 2, 1)),
            LayerDescriptor("input", 1, (2, 2, 1)),
        ]
        assert any("index 0" in v for v in validate_manifest(manifest))

    def test_path_separator_in_layer_name(self):
        manifest = simple_manifest()
        manifest.layers.append(LayerDescriptor("a/b", 1, (2, 2, 1)))
        assert any("path separator" in v for v in validate_manifest(manifest))

    def test_unsorted_indices(self):
        manifest = simple_manifest()
        manifest.layers = [
            LayerDescriptor("input", 0, (2, 2, 1)),
            LayerDescriptor("b", 3, (2, 2, 1)),
            LayerDescriptor("a", 1, (2, 2, 1)),
        ]
        assert any("ascending" in v for v in validate_manifest(manifest))

    def test_pure_same_result_twice(self):
        manifest = simple_manifest(images=("a", "a"))
        assert validate_manifest(manifest) == validate_manifest(manifest)


class TestWriteArchive:
    def test_payload_is_16_bytes(self, tmp_path):
        manifest = simple_manifest(shape=(2, 2, 1))
        write_archive(tmp_path, manifest, {("img0", "input"): [1, 2, 3, 4]})
        payload = payload_path(tmp_path, "img0", "input")
        assert payload.read_bytes() == np.array([1, 2, 3, 4], dtype="<f4").tobytes()
        assert payload.stat().st_size == 16

    def test_wrong_value_count_rejected(self, tmp_path):
        manifest = simple_manifest(shape=(3, 3, 2))
        with pytest.raises(ArchiveError, match="img0.*input"):
            write_archive(tmp_path, manifest, {("img0", "input"): np.ones(10, np.float32)})

    def test_shape_mismatch_names_image_and_layer(self, tmp_path):
        manifest = simple_manifest(shape=(3, 3, 2))
        with pytest.raises(ArchiveError, match="img0.*input"):
            write_archive(
                tmp_path, manifest, {("img0", "input"): np.ones((2, 5, 1), np.float32)}
            )

    def test_non_finite_rejected(self, tmp_path):
        manifest = simple_manifest()
        bad = np.full((2, 2, 1), np.inf, dtype=np.float32)
        with pytest.raises(ArchiveError, match="non-finite"):
            write_archive(tmp_path, manifest, {("img0", "input"): bad})

    def test_missing_tensor_rejected(self, tmp_path):
        manifest = simple_manifest(images=("a", "b"))
        with pytest.raises(ArchiveError, match="no tensor"):
            write_archive(tmp_path, manifest, {("a", "input"): np.zeros((2, 2, 1), np.float32)})

    def test_extra_tensor_rejected(self, tmp_path):
        manifest = simple_manifest()
        tensors = {
            ("img0", "input"): np.zeros((2, 2, 1), np.float32),
            ("ghost", "input"): np.zeros((2, 2, 1), np.float32),
        }
        with pytest.raises(ArchiveError, match="ghost"):
            write_archive(tmp_path, manifest, tensors)


class TestReadArchive:
    def test_round_trip_values_and_manifest(self, tmp_path, rng):
        manifest, tensors = make_archive(
            tmp_path, [(3, 2, 2), (2, 2, 4)], ["a", "b"], rng
        )
        back, reader = read_archive(tmp_path)
        assert back == manifest
        for (image_id, layer), original in tensors.items():
            got = reader.tensor(image_id, layer)
            assert got.dtype == np.float32
            assert np.array_equal(got, original)

    def test_round_trip_bit_exact_randomized(self, tmp_path, rng):
        for trial in range(20):
            root = tmp_path / f"arc{trial}"
            n_layers = int(rng.integers(1, 4))
            shapes = [
                (int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 4)))
                for _ in range(n_layers)
            ]
            image_ids = [f"im{k}" for k in range(int(rng.integers(1, 4)))]
            manifest, tensors = make_archive(root, shapes, image_ids, rng)
            _, reader = read_archive(root)
            for key, original in tensors.items():
                assert reader.tensor(*key).tobytes() == original.tobytes()

    def test_empty_directory_manifest_missing(self, tmp_path):
        with pytest.raises(ArchiveError, match="manifest missing"):
            read_archive(tmp_path)

    def test_truncated_payload_byte_length_error(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 2)], ["a"], rng)
        payload = payload_path(tmp_path, "a", "input")
        data = payload.read_bytes()
        payload.write_bytes(data[: len(data) // 2])
        _, reader = read_archive(tmp_path)
        with pytest.raises(ArchiveError, match="16 bytes, expected 32"):
            reader.tensor("a", "input")

    def test_missing_payload_names_image_and_layer(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1), (1, 1, 2)], ["a"], rng)
        payload_path(tmp_path, "a", "layer1").unlink()
        _, reader = read_archive(tmp_path)
        with pytest.raises(ArchiveError, match="'a' layer 'layer1'"):
            reader.tensor("a", "layer1")

    def test_corrupted_payload_non_finite(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1)], ["a"], rng)
        payload = payload_path(tmp_path, "a", "input")
        payload.write_bytes(np.array([1, np.nan, 3, 4], dtype="<f4").tobytes())
        _, reader = read_archive(tmp_path)
        with pytest.raises(ArchiveError, match="non-finite"):
            reader.tensor("a", "input")

    def test_lazy_access_touches_one_file(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1), (1, 1, 2), (1, 2, 1)], ["a", "b", "c"], rng)
        _, reader = read_archive(tmp_path)
        reader.tensor("b", "layer2")
        assert reader.access_log == [payload_path(tmp_path, "b", "layer2")]

    def test_manifest_bytes_deterministic(self, tmp_path, rng):
        manifest, tensors = make_archive(tmp_path / "one", [(2, 2, 1)], ["a"], rng)
        write_archive(tmp_path / "two", manifest, tensors)
        one = (tmp_path / "one" / "manifest.json").read_bytes()
        two = (tmp_path / "two" / "manifest.json").read_bytes()
        assert one == two


class TestValidateArchive:
    def test_intact_archive_clean(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1), (3, 1, 2)], ["a", "b"], rng)
        assert validate_archive(tmp_path) == []

    def test_detects_missing_and_truncated(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1), (3, 1, 2)], ["a", "b"], rng)
        payload_path(tmp_path, "a", "layer1").unlink()
        full = payload_path(tmp_path, "b", "input")
        full.write_bytes(full.read_bytes()[:-4])
        violations = validate_archive(tmp_path)
        assert len(violations) == 2

    def test_manifest_violations_reported(self, tmp_path, rng):
        make_archive(tmp_path, [(2, 2, 1)], ["a"], rng)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["images"].append(doc["images"][0])
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        assert any("duplicate image id" in v for v in validate_archive(tmp_path))
