"""Registry of the evaluated pretrained models and their reported accuracies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

from .errors import ParseError

REGISTRY_CSV_COLUMNS = (
    "model_id",
    "architecture",
    "training",
    "training_data",
    "imagenet_top1",
)


@dataclass(frozen=True)
class ModelRegistryEntry:
    model_id: str
    architecture: str
    training: str  # "supervised" or the self-supervised objective
    training_data: str
    imagenet_top1: float

    def __post_init__(self):
        if not (math.isfinite(self.imagenet_top1) and 0.0 <= self.imagenet_top1 <= 100.0):
            raise ValueError(f"imagenet_top1 must be in [0, 100], got {self.imagenet_top1}")

    @property
    def is_supervised(self) -> bool:
        return self.training == "supervised"

    @property
    def training_tag(self) -> str:
        return "supervised" if self.is_supervised else "self-supervised"


# ImageNet-1K models with their published Top-1 accuracies.
DEFAULT_REGISTRY: tuple = (
    ModelRegistryEntry("alexnet-imagenet-supervised", "AlexNet", "supervised", "ImageNet-1K", 56.5),
    ModelRegistryEntry("vgg16-imagenet-supervised", "VGG-16", "supervised", "ImageNet-1K", 71.3),
    ModelRegistryEntry("densenet121-imagenet-supervised", "DenseNet-121", "supervised", "ImageNet-1K", 75.0),
    ModelRegistryEntry("resnet50-imagenet-supervised", "ResNet-50", "supervised", "ImageNet-1K", 74.9),
    ModelRegistryEntry("efficientnetb0-imagenet-supervised", "EfficientNet-B0", "supervised", "ImageNet-1K", 77.7),
    ModelRegistryEntry("alexnet-imagenet-rotnet", "AlexNet", "self-rotnet", "ImageNet-1K", 39.5),
    ModelRegistryEntry("alexnet-imagenet-jigsaw", "AlexNet", "self-jigsaw", "ImageNet-1K", 34.8),
    ModelRegistryEntry("alexnet-imagenet-colorization", "AlexNet", "self-colorization", "ImageNet-1K", 30.4),
    ModelRegistryEntry("alexnet-imagenet-deepcluster", "AlexNet", "self-deepcluster", "ImageNet-1K", 37.9),
)


def registry_to_csv(entries: Sequence[ModelRegistryEntry]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REGISTRY_CSV_COLUMNS)
    for e in entries:
        writer.writerow([e.model_id, e.architecture, e.training, e.training_data, repr(e.imagenet_top1)])
    return out.getvalue()


def registry_from_csv(text: str) -> List[ModelRegistryEntry]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or tuple(cell.strip() for cell in rows[0]) != REGISTRY_CSV_COLUMNS:
        raise ParseError(f"expected header {','.join(REGISTRY_CSV_COLUMNS)}")
    entries = []
    for rowno, row in enumerate(rows[1:], start=2):
        if len(row) != len(REGISTRY_CSV_COLUMNS):
            raise ParseError(f"row {rowno}: expected {len(REGISTRY_CSV_COLUMNS)} fields")
        model_id, architecture, training, training_data, top1_text = row
        try:
            top1 = float(top1_text)
        except ValueError as exc:
            raise ParseError(f"row {rowno}: unparseable top-1 {top1_text!r}") from exc
        try:
            entries.append(
                ModelRegistryEntry(model_id, architecture, training, training_data, top1)
            )
        except ValueError as exc:
            raise ParseError(f"row {rowno}: {exc}") from exc
    return entries


def write_registry(path, entries: Sequence[ModelRegistryEntry]) -> None:
    Path(path).write_text(registry_to_csv(entries), encoding="utf-8")


def read_registry(path) -> List[ModelRegistryEntry]:
    return registry_from_csv(Path(path).read_text(encoding="utf-8"))
