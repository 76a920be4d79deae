"""Experiment orchestration: layer-wise correlation reports and the
accuracy-vs-correlation scatter.

A CorrelationReport is a plot-ready table: one row per evaluated layer (or a
single "concat" row) with the layer's depth expressed as a fraction of the
archive's recorded layers, the Spearman rho against MOS, the polarity-signed
correlation score, and the pair count. Reports serialize deterministically,
so identical evaluations produce identical bytes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .archive import ArchiveReader
from .datasets import PairRecord
from .distances import ReadoutConfig, readout_squared_distance
from .errors import ArchiveError, FeatIQError, ParseError
from .rankstats import POLARITIES, correlation_score, spearman
from .registry import ModelRegistryEntry

REPORT_HEADER = ("layer_name", "layer_index", "depth_fraction", "spearman", "score", "n_pairs")
REPORT_FORMATS = ("csv", "structured-text")
CONCAT_ROW_NAME = "concat"


@dataclass(frozen=True)
class ReportRow:
    layer_name: str
    layer_index: int
    depth_fraction: float
    spearman: float
    score: float
    n_pairs: int


@dataclass
class CorrelationReport:
    model_id: str
    database: str
    readout: str
    rows: List[ReportRow]


def describe_readout(config: ReadoutConfig, polarity: str) -> str:
    """Compact one-line summary of how distances were computed."""
    parts = [
        f"strategy={config.strategy}",
        "layers=" + ",".join(config.layers),
        f"concat={str(config.concatenate).lower()}",
        f"weights={'fitted' if config.weights is not None else 'none'}",
        f"polarity={polarity}",
    ]
    if not config.gram_normalize:
        parts.append("gram_normalize=false")
    if config.normalize_layers:
        parts.append("normalize_layers=true")
    return ";".join(parts)


def _check_coverage(
    reader: ArchiveReader, records: Sequence[PairRecord], layers: Sequence[str]
) -> None:
    manifest = reader.manifest
    known_layers = set(manifest.layer_names())
    unknown = [l for l in layers if l not in known_layers]
    if unknown:
        raise ArchiveError(f"layers not in archive: {', '.join(unknown)}")
    known_images = set(manifest.image_ids())
    needed = sorted(
        {rec.reference_id for rec in records} | {rec.distorted_id for rec in records}
    )
    missing = [
        (image_id, layer)
        for image_id in needed
        if image_id not in known_images
        for layer in layers
    ]
    if missing:
        shown = ", ".join(f"({i}, {l})" for i, l in missing[:20])
        more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
        raise ArchiveError(f"archive does not cover: {shown}{more}")


def _pair_squared_distances(
    reader: ArchiveReader,
    records: Sequence[PairRecord],
    layer: str,
    config: ReadoutConfig,
) -> np.ndarray:
    # references repeat across pairs; cache them per layer
    ref_cache: Dict[str, np.ndarray] = {}
    out = np.empty(len(records), dtype=np.float64)
    for i, rec in enumerate(records):
        ref = ref_cache.get(rec.reference_id)
        if ref is None:
            ref = reader.tensor(rec.reference_id, layer)
            ref_cache[rec.reference_id] = ref
        dist = reader.tensor(rec.distorted_id, layer)
        out[i] = readout_squared_distance(ref, dist, layer, config)
    return out


def evaluate_layerwise(
    reader: ArchiveReader,
    records: Sequence[PairRecord],
    config: ReadoutConfig,
    polarity: str = "higher_is_better",
) -> CorrelationReport:
    """Distance-vs-MOS correlation per configured layer (or concatenated).

    Rows are ordered by layer index; depth_fraction is the layer index over
    the archive's maximum recorded index (input = 0, last layer = 1).
    """
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}; expected one of {POLARITIES}")
    if not records:
        raise ValueError("no records to evaluate")
    _check_coverage(reader, records, config.layers)
    manifest = reader.manifest
    max_index = max(d.index for d in manifest.layers)
    mos = np.array([rec.mos for rec in records], dtype=np.float64)
    databases = sorted({rec.database for rec in records})
    database = "+".join(databases)

    ordered = sorted(config.layers, key=lambda name: manifest.layer(name).index)
    rows: List[ReportRow] = []
    if config.concatenate:
        total = np.zeros(len(records), dtype=np.float64)
        for layer in ordered:
            total += _pair_squared_distances(reader, records, layer, config)
        distances = np.sqrt(total)
        rho = spearman(distances, mos)
        score = correlation_score(distances, mos, polarity)
        index = manifest.layer(ordered[-1]).index
        rows.append(
            ReportRow(
                layer_name=CONCAT_ROW_NAME,
                layer_index=index,
                depth_fraction=index / max_index if max_index else 0.0,
                spearman=rho,
                score=score,
                n_pairs=len(records),
            )
        )
    else:
        for layer in ordered:
            distances = np.sqrt(_pair_squared_distances(reader, records, layer, config))
            rho = spearman(distances, mos)
            score = correlation_score(distances, mos, polarity)
            index = manifest.layer(layer).index
            rows.append(
                ReportRow(
                    layer_name=layer,
                    layer_index=index,
                    depth_fraction=index / max_index if max_index else 0.0,
                    spearman=rho,
                    score=score,
                    n_pairs=len(records),
                )
            )
    return CorrelationReport(
        model_id=manifest.model_id,
        database=database,
        readout=describe_readout(config, polarity),
        rows=rows,
    )


REPORT_MAGIC = "# featiq-report-v1"


def report_to_csv(report: CorrelationReport) -> str:
    """Deterministic CSV with metadata comment lines; floats use repr."""
    for name, value in (("model_id", report.model_id), ("database", report.database), ("readout", report.readout)):
        if "\n" in value or "\r" in value:
            raise ValueError(f"{name} must not contain newlines")
    out = io.StringIO()
    out.write(REPORT_MAGIC + "\n")
    out.write(f"# model_id={report.model_id}\n")
    out.write(f"# database={report.database}\n")
    out.write(f"# readout={report.readout}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for row in report.rows:
        writer.writerow(
            [
                row.layer_name,
                row.layer_index,
                repr(row.depth_fraction),
                repr(row.spearman),
                repr(row.score),
                row.n_pairs,
            ]
        )
    return out.getvalue()


def report_from_csv(text: str) -> CorrelationReport:
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_MAGIC:
        raise ParseError(f"not a report file (missing {REPORT_MAGIC!r} line)")
    meta: Dict[str, str] = {}
    body_start = 1
    for i, line in enumerate(lines[1:], start=1):
        if line.startswith("# ") and "=" in line:
            key, value = line[2:].split("=", 1)
            meta[key] = value
            body_start = i + 1
        else:
            break
    for key in ("model_id", "database", "readout"):
        if key not in meta:
            raise ParseError(f"report missing metadata line for {key!r}")
    reader = csv.reader(io.StringIO("\n".join(lines[body_start:])))
    table = [row for row in reader if row]
    if not table or tuple(table[0]) != REPORT_HEADER:
        raise ParseError(f"expected header {','.join(REPORT_HEADER)}")
    rows = []
    for rowno, row in enumerate(table[1:], start=2):
        if len(row) != len(REPORT_HEADER):
            raise ParseError(f"report row {rowno}: expected {len(REPORT_HEADER)} fields")
        try:
            rows.append(
                ReportRow(
                    layer_name=row[0],
                    layer_index=int(row[1]),
                    depth_fraction=float(row[2]),
                    spearman=float(row[3]),
                    score=float(row[4]),
                    n_pairs=int(row[5]),
                )
            )
        except ValueError as exc:
            raise ParseError(f"report row {rowno}: {exc}") from exc
    return CorrelationReport(
        model_id=meta["model_id"], database=meta["database"], readout=meta["readout"], rows=rows
    )


def report_to_text(report: CorrelationReport) -> str:
    """Human-readable fixed-width rendering (deterministic, not parsed back)."""
    out = io.StringIO()
    out.write(f"model_id: {report.model_id}\n")
    out.write(f"database: {report.database}\n")
    out.write(f"readout:  {report.readout}\n")
    out.write(f"{'layer':<24} {'index':>5} {'depth':>8} {'spearman':>10} {'score':>10} {'pairs':>7}\n")
    for row in report.rows:
        out.write(
            f"{row.layer_name:<24} {row.layer_index:>5} {row.depth_fraction:>8.4f} "
            f"{row.spearman:>10.6f} {row.score:>10.6f} {row.n_pairs:>7}\n"
        )
    return out.getvalue()


def emit_report(report: CorrelationReport, path, fmt: str = "csv") -> None:
    """Write a report; identical reports produce identical bytes."""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {REPORT_FORMATS}")
    text = report_to_csv(report) if fmt == "csv" else report_to_text(report)
    Path(path).write_text(text, encoding="utf-8")


def parse_report(path) -> CorrelationReport:
    return report_from_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ScatterRow:
    model_id: str
    imagenet_top1: float
    training_tag: str
    max_score: float


def accuracy_correlation_table(
    registry: Sequence[ModelRegistryEntry], reports: Sequence[CorrelationReport]
) -> List[ScatterRow]:
    """One row per registry model: its top-1 accuracy and the maximum
    correlation score across every layer of every report for that model."""
    by_model: Dict[str, List[CorrelationReport]] = {}
    for report in reports:
        by_model.setdefault(report.model_id, []).append(report)
    rows: List[ScatterRow] = []
    for entry in registry:
        model_reports = by_model.get(entry.model_id, [])
        scores = [row.score for report in model_reports for row in report.rows]
        if not scores:
            raise FeatIQError(f"model {entry.model_id!r} has no report rows")
        rows.append(
            ScatterRow(
                model_id=entry.model_id,
                imagenet_top1=entry.imagenet_top1,
                training_tag=entry.training_tag,
                max_score=max(scores),
            )
        )
    return rows


SCATTER_HEADER = ("model_id", "imagenet_top1", "training", "max_score")


def scatter_to_csv(rows: Sequence[ScatterRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCATTER_HEADER)
    for row in rows:
        writer.writerow(
            [row.model_id, repr(row.imagenet_top1), row.training_tag, repr(row.max_score)]
        )
    return out.getvalue()
