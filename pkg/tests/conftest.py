import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from featiq.archive import ArchiveManifest, LayerDescriptor, write_archive


def random_map(rng, shape=None, scale=1.0):
    """Random float32 feature map with a small random shape by default."""
    if shape is None:
        shape = (int(rng.integers(1, 7)), int(rng.integers(1, 7)), int(rng.integers(1, 6)))
    return (rng.standard_normal(shape) * scale).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(20131)


def planted_table(rng, n_pairs=400, n_channels=16, noise_scale=4.0):
    """Contribution table where channel 0 carries a strict monotone function
    of (9 - mos) and every other channel is independent noise."""
    from featiq.finetune import ContributionTable

    mos = rng.uniform(1.0, 9.0, n_pairs)
    contribs = np.empty((n_pairs, n_channels))
    contribs[:, 0] = (0.5 * (9.0 - mos)) ** 2
    contribs[:, 1:] = (noise_scale * rng.random((n_pairs, n_channels - 1))) ** 2
    return ContributionTable(contribs, mos, (("L", 0, n_channels),))


def build_scored_archive(root, n_pairs, rng, model_id="synthetic-model"):
    """Archive with layers input/good/bad plus matching pair records.

    Distances at layer "good" are exactly (9 - mos): MOS values live on a
    0.001 grid so float32 storage cannot merge distinct values, which keeps
    the distance a strictly monotone (tie-preserving) function of the score.
    Layer "bad" is independent noise; "input" maps are random.
    """
    from featiq.datasets import PairRecord

    mos = rng.integers(1000, 9001, size=n_pairs) / 1000.0
    layers = [
        LayerDescriptor("input", 0, (2, 2, 3)),
        LayerDescriptor("good", 1, (1, 1, 1)),
        LayerDescriptor("bad", 2, (1, 1, 1)),
    ]
    image_ids = ["ref"] + [f"d{i:04d}" for i in range(n_pairs)]
    manifest = ArchiveManifest(
        model_id=model_id,
        preprocessing_note="synthetic",
        layers=layers,
        images=[(i, f"{i}.png") for i in image_ids],
    )
    tensors = {
        ("ref", "input"): random_map(rng, (2, 2, 3)),
        ("ref", "good"): np.zeros((1, 1, 1), np.float32),
        ("ref", "bad"): np.zeros((1, 1, 1), np.float32),
    }
    records = []
    for i in range(n_pairs):
        image_id = f"d{i:04d}"
        tensors[(image_id, "input")] = random_map(rng, (2, 2, 3))
        tensors[(image_id, "good")] = np.full((1, 1, 1), 9.0 - mos[i], np.float32)
        tensors[(image_id, "bad")] = rng.random((1, 1, 1)).astype(np.float32)
        records.append(PairRecord("ref", image_id, float(mos[i]), "TID2013"))
    write_archive(root, manifest, tensors)
    return records


def make_archive(root, layer_shapes, image_ids, rng, model_id="test-model"):
    """Write a random archive; returns (manifest, tensors) for comparison."""
    layers = [LayerDescriptor("input", 0, layer_shapes[0])]
    for i, shape in enumerate(layer_shapes[1:], start=1):
        layers.append(LayerDescriptor(f"layer{i}", i, shape))
    manifest = ArchiveManifest(
        model_id=model_id,
        preprocessing_note="synthetic",
        layers=layers,
        images=[(image_id, f"{image_id}.png") for image_id in image_ids],
    )
    tensors = {
        (image_id, desc.name): random_map(rng, desc.shape)
        for image_id in image_ids
        for desc in layers
    }
    write_archive(root, manifest, tensors)
    return manifest, tensors
