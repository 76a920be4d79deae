"""On-disk feature archives: raw f32 payloads plus a JSON manifest.

An archive is a directory holding one ``manifest.json`` and one payload file
per (image, layer) pair at ``<image_id>/<layer_name>.bin``. Payloads are raw
little-endian 32-bit floats in row-major (H, W, C) order, so any runtime can
produce them and a write/read round trip is bit-exact. The preprocessed
image itself is stored as layer "input" (index 0), which makes the RGB-domain
distance just another layer of the archive.

Archives are immutable once written; concurrent readers need no coordination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import ArchiveError

MANIFEST_NAME = "manifest.json"
DTYPE_TAG = "f32-le"
LAYOUT_TAG = "hwc"
INPUT_LAYER = "input"

Shape = Tuple[int, int, int]


def as_feature_map(values, shape: Shape | None = None) -> np.ndarray:
    """Coerce ``values`` to a float32 (H, W, C) array and check its invariants.

    Raises ValueError if the result is not 3-D with positive axes, or if any
    element is non-finite.
    """
    arr = np.asarray(values, dtype=np.float32)
    if shape is not None:
        if arr.size != int(np.prod(shape)):
            raise ValueError(
                f"value count {arr.size} does not fill shape {tuple(shape)}"
            )
        arr = arr.reshape(shape)
    if arr.ndim != 3:
        raise ValueError(f"feature map must be (H, W, C), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"feature map axes must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("feature map contains non-finite values")
    return arr


@dataclass(frozen=True)
class LayerDescriptor:
    """One capture point: unique name, topological index, fixed (H, W, C)."""

    name: str
    index: int
    shape: Shape

    def to_dict(self) -> dict:
        return {"name": self.name, "index": self.index, "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerDescriptor":
        try:
            shape = tuple(int(x) for x in d["shape"])
            if len(shape) != 3:
                raise ValueError
            return cls(name=str(d["name"]), index=int(d["index"]), shape=shape)  # type: ignore[arg-type]
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveError(f"malformed layer descriptor: {d!r}") from exc


@dataclass
class ArchiveManifest:
    """Archive contents: model provenance, layer list, image list, format tags."""

    model_id: str
    preprocessing_note: str
    layers: List[LayerDescriptor]
    images: List[Tuple[str, str]]  # (image_id, source_file)
    dtype: str = DTYPE_TAG
    layout: str = LAYOUT_TAG

    def layer(self, name: str) -> LayerDescriptor:
        for desc in self.layers:
            if desc.name == name:
                return desc
        raise ArchiveError(f"layer {name!r} not in manifest")

    def layer_names(self) -> List[str]:
        return [d.name for d in self.layers]

    def image_ids(self) -> List[str]:
        return [image_id for image_id, _ in self.images]

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "preprocessing_note": self.preprocessing_note,
            "dtype": self.dtype,
            "layout": self.layout,
            "layers": [d.to_dict() for d in self.layers],
            "images": [
                {"image_id": image_id, "source_file": source}
                for image_id, source in self.images
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchiveManifest":
        try:
            layers = [LayerDescriptor.from_dict(x) for x in d["layers"]]
            images = [
                (str(x["image_id"]), str(x["source_file"])) for x in d["images"]
            ]
            return cls(
                model_id=str(d["model_id"]),
                preprocessing_note=str(d["preprocessing_note"]),
                layers=layers,
                images=images,
                dtype=str(d["dtype"]),
                layout=str(d["layout"]),
            )
        except (KeyError, TypeError) as exc:
            raise ArchiveError(f"manifest missing or malformed field: {exc}") from exc


def _bad_name(name: str) -> bool:
    return name == "" or "/" in name or "\\" in name or name in (".", "..")


def validate_manifest(manifest: ArchiveManifest) -> List[str]:
    """Collect every manifest invariant violation; empty list means valid.

    Pure: never touches the filesystem and never aborts on first failure.
    """
    violations: List[str] = []
    if manifest.dtype != DTYPE_TAG:
        violations.append(f"dtype tag must be {DTYPE_TAG!r}, got {manifest.dtype!r}")
    if manifest.layout != LAYOUT_TAG:
        violations.append(f"layout tag must be {LAYOUT_TAG!r}, got {manifest.layout!r}")

    seen_names: Dict[str, int] = {}
    seen_indices: Dict[int, int] = {}
    for desc in manifest.layers:
        seen_names[desc.name] = seen_names.get(desc.name, 0) + 1
        seen_indices[desc.index] = seen_indices.get(desc.index, 0) + 1
        if _bad_name(desc.name):
            violations.append(f"layer name {desc.name!r} is empty or contains a path separator")
        if desc.index < 0:
            violations.append(f"layer {desc.name!r} has negative index {desc.index}")
        if len(desc.shape) != 3 or min(desc.shape) < 1:
            violations.append(f"layer {desc.name!r} has non-positive shape {desc.shape}")
    for name, count in seen_names.items():
        if count > 1:
            violations.append(f"duplicate layer name {name!r}")
    for index, count in seen_indices.items():
        if count > 1:
            violations.append(f"duplicate layer index {index}")
    indices = [d.index for d in manifest.layers]
    if indices != sorted(indices):
        violations.append("layer indices are not in ascending order")
    input_layers = [d for d in manifest.layers if d.name == INPUT_LAYER]
    if not input_layers:
        violations.append('layer "input" is missing')
    elif input_layers[0].index != 0:
        violations.append(f'layer "input" must have index 0, got {input_layers[0].index}')

    seen_images: Dict[str, int] = {}
    for image_id, _source in manifest.images:
        seen_images[image_id] = seen_images.get(image_id, 0) + 1
        if _bad_name(image_id):
            violations.append(f"image id {image_id!r} is empty or contains a path separator")
    for image_id, count in seen_images.items():
        if count > 1:
            violations.append(f"duplicate image id {image_id!r}")
    return violations


def payload_path(root: Path, image_id: str, layer_name: str) -> Path:
    return Path(root) / image_id / f"{layer_name}.bin"


def write_archive(
    root_path,
    manifest: ArchiveManifest,
    tensors: Mapping[Tuple[str, str], np.ndarray],
) -> None:
    """Write ``manifest`` and one payload per (image_id, layer_name) tensor.

    Every manifest (image, layer) pair must be present in ``tensors`` with the
    shape declared by its LayerDescriptor, and no extra keys are allowed.
    Non-finite values are rejected. Re-reading the archive yields bit-identical
    values.
    """
    root = Path(root_path)
    violations = validate_manifest(manifest)
    if violations:
        raise ArchiveError("invalid manifest: " + "; ".join(violations))

    expected = {
        (image_id, desc.name)
        for image_id, _ in manifest.images
        for desc in manifest.layers
    }
    missing = expected - set(tensors)
    if missing:
        image_id, layer = sorted(missing)[0]
        raise ArchiveError(f"no tensor supplied for image {image_id!r} layer {layer!r}")
    extra = set(tensors) - expected
    if extra:
        image_id, layer = sorted(extra)[0]
        raise ArchiveError(f"tensor for image {image_id!r} layer {layer!r} is not in the manifest")

    root.mkdir(parents=True, exist_ok=True)
    for image_id, _source in manifest.images:
        (root / image_id).mkdir(exist_ok=True)
        for desc in manifest.layers:
            raw = np.asarray(tensors[(image_id, desc.name)])
            try:
                # flat or (H*W, C)-style input is laid out into the declared shape
                arr = as_feature_map(raw, shape=None if raw.ndim == 3 else desc.shape)
            except ValueError as exc:
                raise ArchiveError(f"image {image_id!r} layer {desc.name!r}: {exc}") from exc
            if arr.shape != desc.shape:
                raise ArchiveError(
                    f"image {image_id!r} layer {desc.name!r}: tensor shape "
                    f"{arr.shape} does not match manifest shape {desc.shape}"
                )
            payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            payload_path(root, image_id, desc.name).write_bytes(payload)
    manifest_text = json.dumps(manifest.to_dict(), indent=2) + "\n"
    (root / MANIFEST_NAME).write_text(manifest_text, encoding="utf-8")


class ArchiveReader:
    """Lazy tensor access: each request touches only its own payload file.

    ``access_log`` records every payload path read, which lets tests observe
    that nothing else was loaded.
    """

    def __init__(self, root: Path, manifest: ArchiveManifest):
        self.root = Path(root)
        self.manifest = manifest
        self._images = set(manifest.image_ids())
        self.access_log: List[Path] = []

    def has(self, image_id: str, layer_name: str) -> bool:
        return image_id in self._images and any(
            d.name == layer_name for d in self.manifest.layers
        )

    def tensor(self, image_id: str, layer_name: str) -> np.ndarray:
        """Load one FeatureMap; raises ArchiveError naming the (image, layer)."""
        if image_id not in self._images:
            raise ArchiveError(f"image {image_id!r} not in manifest")
        desc = self.manifest.layer(layer_name)
        path = payload_path(self.root, image_id, layer_name)
        if not path.is_file():
            raise ArchiveError(
                f"missing payload for image {image_id!r} layer {layer_name!r}: {path}"
            )
        data = path.read_bytes()
        self.access_log.append(path)
        h, w, c = desc.shape
        expected = h * w * c * 4
        if len(data) != expected:
            raise ArchiveError(
                f"payload for image {image_id!r} layer {layer_name!r} has "
                f"{len(data)} bytes, expected {expected}"
            )
        arr = np.frombuffer(data, dtype="<f4").reshape(desc.shape)
        if not np.isfinite(arr).all():
            raise ArchiveError(
                f"payload for image {image_id!r} layer {layer_name!r} contains non-finite values"
            )
        return arr


def read_archive(root_path) -> Tuple[ArchiveManifest, ArchiveReader]:
    """Parse and validate the manifest; payloads are only read on demand."""
    root = Path(root_path)
    manifest_file = root / MANIFEST_NAME
    if not manifest_file.is_file():
        raise ArchiveError(f"manifest missing: {manifest_file}")
    try:
        doc = json.loads(manifest_file.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"unreadable manifest {manifest_file}: {exc}") from exc
    manifest = ArchiveManifest.from_dict(doc)
    violations = validate_manifest(manifest)
    if violations:
        raise ArchiveError("invalid manifest: " + "; ".join(violations))
    return manifest, ArchiveReader(root, manifest)


def validate_archive(root_path) -> List[str]:
    """Full integrity check: manifest invariants plus every payload's
    presence, byte length, and finiteness. Returns all violations found."""
    root = Path(root_path)
    manifest_file = root / MANIFEST_NAME
    if not manifest_file.is_file():
        return [f"manifest missing: {manifest_file}"]
    try:
        doc = json.loads(manifest_file.read_text(encoding="utf-8"))
        manifest = ArchiveManifest.from_dict(doc)
    except (ArchiveError, OSError, json.JSONDecodeError) as exc:
        return [f"unreadable manifest: {exc}"]
    violations = validate_manifest(manifest)
    if violations:
        return violations
    reader = ArchiveReader(root, manifest)
    for image_id, _source in manifest.images:
        for desc in manifest.layers:
            try:
                reader.tensor(image_id, desc.name)
            except ArchiveError as exc:
                violations.append(str(exc))
    return violations
