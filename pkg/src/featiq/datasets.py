"""Opinion-score database ingestion and deterministic train/val splits.

Supported inputs: the TID-2008/TID-2013 ``mos_with_names`` text format
(``<mos> <distorted filename>`` per line, filenames following the
``iRR_TT_L.bmp`` convention) and the KADID-10K comma-separated dmos table.
Parsed records serialize to one canonical CSV with columns
(database, reference_id, distorted_id, mos, distortion_type, distortion_level).
"""

from __future__ import annotations

import csv
import io
import math
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ParseError

DATABASES = ("TID2008", "TID2013", "KADID10K")
GRANULARITIES = ("by_pair", "by_reference")

# Sanity ranges of the shipped files (TID rates 0-9, KADID 1-5).
MOS_RANGES = {"TID2008": (0.0, 9.0), "TID2013": (0.0, 9.0), "KADID10K": (1.0, 5.0)}

PAIR_CSV_COLUMNS = (
    "database",
    "reference_id",
    "distorted_id",
    "mos",
    "distortion_type",
    "distortion_level",
)

# case-insensitive: TID distributions mix cases across mirrors
_TID_NAME = re.compile(r"^i(\d+)_(\d+)_(\d+)\.bmp$", re.IGNORECASE)
_KADID_NAME = re.compile(r"^(i\d+)_(\d+)_(\d+)$", re.IGNORECASE)


@dataclass(frozen=True)
class PairRecord:
    """One (reference image, distorted image, MOS) row of an IQA database."""

    reference_id: str
    distorted_id: str
    mos: float
    database: str
    distortion_type: Optional[int] = None
    distortion_level: Optional[int] = None


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic partition request: fraction, seed, and granularity."""

    train_fraction: float
    seed: int
    granularity: str = "by_pair"

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(
                f"unknown granularity {self.granularity!r}; expected one of {GRANULARITIES}"
            )


def _check_duplicates(records: Sequence[PairRecord]) -> None:
    seen = set()
    for rec in records:
        key = (rec.database, rec.reference_id, rec.distorted_id)
        if key in seen:
            raise ParseError(
                f"duplicate pair ({rec.reference_id}, {rec.distorted_id}) in {rec.database}"
            )
        seen.add(key)


def parse_tid_mos(text: str, database: str = "TID2013") -> List[PairRecord]:
    """Parse a TID ``mos_with_names`` file: one "<mos> <filename>" per line.

    Reference id, distortion type, and level are decoded from the filename
    convention ``iRR_TT_L.bmp``; ids are lowercased for stability across
    mirrors. The full TID-2013 file yields 3000 records, TID-2008 1700.
    """
    if database not in ("TID2008", "TID2013"):
        raise ValueError(f"database must be TID2008 or TID2013, got {database!r}")
    records: List[PairRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"line {lineno}: expected '<mos> <filename>', got {raw!r}")
        mos_text, filename = fields
        try:
            mos = float(mos_text)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: unparseable MOS {mos_text!r}") from exc
        if not math.isfinite(mos):
            raise ParseError(f"line {lineno}: non-finite MOS {mos_text!r}")
        match = _TID_NAME.match(filename)
        if not match:
            raise ParseError(
                f"line {lineno}: filename {filename!r} does not match iRR_TT_L.bmp"
            )
        ref_num, dist_type, dist_level = match.groups()
        records.append(
            PairRecord(
                reference_id=f"i{ref_num}".lower(),
                distorted_id=Path(filename).stem.lower(),
                mos=mos,
                database=database,
                distortion_type=int(dist_type),
                distortion_level=int(dist_level),
            )
        )
    _check_duplicates(records)
    return records


_KADID_COLUMN_ALIASES = {
    "dist_img": ("dist_img", "distorted_img", "dist", "distorted"),
    "ref_img": ("ref_img", "reference_img", "ref", "reference"),
    "dmos": ("dmos", "mos", "dmos_value"),
}


def parse_kadid_dmos(text: str) -> List[PairRecord]:
    """Parse the KADID-10K dmos table (CSV with a header row).

    Distorted/reference ids are the filename stems; distortion type and level
    are decoded from the ``IRR_TT_LL`` stem convention when it matches. The
    full table yields 10125 records.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError("empty KADID table: header row missing")
    header = [cell.strip().lower() for cell in rows[0]]
    columns: Dict[str, int] = {}
    for canonical, aliases in _KADID_COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in header:
                columns[canonical] = header.index(alias)
                break
        else:
            raise ParseError(f"missing column {canonical!r} in KADID header {header}")
    records: List[PairRecord] = []
    for rowno, row in enumerate(rows[1:], start=2):
        if len(row) < len(header):
            raise ParseError(f"row {rowno}: expected {len(header)} fields, got {len(row)}")
        dist_name = row[columns["dist_img"]].strip()
        ref_name = row[columns["ref_img"]].strip()
        score_text = row[columns["dmos"]].strip()
        try:
            mos = float(score_text)
        except ValueError as exc:
            raise ParseError(f"row {rowno}: unparseable score {score_text!r}") from exc
        if not math.isfinite(mos):
            raise ParseError(f"row {rowno}: non-finite score {score_text!r}")
        if not dist_name or not ref_name:
            raise ParseError(f"row {rowno}: empty image id")
        distorted_id = Path(dist_name).stem
        reference_id = Path(ref_name).stem
        match = _KADID_NAME.match(distorted_id)
        dist_type = int(match.group(2)) if match else None
        dist_level = int(match.group(3)) if match else None
        records.append(
            PairRecord(
                reference_id=reference_id,
                distorted_id=distorted_id,
                mos=mos,
                database="KADID10K",
                distortion_type=dist_type,
                distortion_level=dist_level,
            )
        )
    _check_duplicates(records)
    return records


def _sort_key(rec: PairRecord) -> Tuple[str, str, str]:
    return (rec.database, rec.reference_id, rec.distorted_id)


def split_records(
    records: Sequence[PairRecord], spec: SplitSpec
) -> Tuple[List[PairRecord], List[PairRecord]]:
    """Deterministic, exhaustive, disjoint train/val partition.

    ``by_pair`` shuffles records (after sorting, so input order is irrelevant)
    and cuts at round(train_fraction * N). ``by_reference`` assigns whole
    reference-image groups to the train side until that record target is
    reached, so no reference appears on both sides.
    """
    if not records:
        raise ValueError("no records to split")
    ordered = sorted(records, key=_sort_key)
    n = len(ordered)
    # round half down: the 70/30 cut of KADID-10K lands exactly on 7087.5 and
    # the published counts put the odd record on the validation side
    target = math.ceil(spec.train_fraction * n - 0.5)
    rng = random.Random(spec.seed)
    train_idx: set = set()
    if spec.granularity == "by_pair":
        indices = list(range(n))
        rng.shuffle(indices)
        train_idx = set(indices[:target])
    else:
        groups: Dict[str, List[int]] = {}
        for i, rec in enumerate(ordered):
            groups.setdefault(rec.reference_id, []).append(i)
        refs = sorted(groups)
        rng.shuffle(refs)
        count = 0
        for ref in refs:
            if count >= target:
                break
            train_idx.update(groups[ref])
            count += len(groups[ref])
    train = [rec for i, rec in enumerate(ordered) if i in train_idx]
    val = [rec for i, rec in enumerate(ordered) if i not in train_idx]
    return train, val


def pair_manifest(records: Sequence[PairRecord]) -> List[str]:
    """Sorted, deduplicated union of reference and distorted image ids."""
    ids = {rec.reference_id for rec in records} | {rec.distorted_id for rec in records}
    return sorted(ids)


def validate_records(records: Sequence[PairRecord]) -> List[str]:
    """Range and uniqueness sanity checks; violations are data, not errors."""
    violations: List[str] = []
    seen = set()
    for rec in records:
        if not rec.reference_id or not rec.distorted_id:
            violations.append(f"empty image id in {rec}")
        if not math.isfinite(rec.mos):
            violations.append(f"non-finite MOS for ({rec.reference_id}, {rec.distorted_id})")
        if rec.database not in DATABASES:
            violations.append(f"unknown database {rec.database!r}")
        else:
            lo, hi = MOS_RANGES[rec.database]
            if not (lo <= rec.mos <= hi):
                violations.append(
                    f"MOS {rec.mos} outside [{lo}, {hi}] for "
                    f"({rec.reference_id}, {rec.distorted_id}) in {rec.database}"
                )
        key = (rec.database, rec.reference_id, rec.distorted_id)
        if key in seen:
            violations.append(f"duplicate pair {key}")
        seen.add(key)
    return violations


def records_to_csv(records: Sequence[PairRecord]) -> str:
    """Canonical CSV serialization; floats use repr so parsing is lossless."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PAIR_CSV_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                rec.database,
                rec.reference_id,
                rec.distorted_id,
                repr(rec.mos),
                "" if rec.distortion_type is None else rec.distortion_type,
                "" if rec.distortion_level is None else rec.distortion_level,
            ]
        )
    return out.getvalue()


def records_from_csv(text: str) -> List[PairRecord]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or tuple(cell.strip() for cell in rows[0]) != PAIR_CSV_COLUMNS:
        raise ParseError(f"expected header {','.join(PAIR_CSV_COLUMNS)}")
    records: List[PairRecord] = []
    for rowno, row in enumerate(rows[1:], start=2):
        if len(row) != len(PAIR_CSV_COLUMNS):
            raise ParseError(f"row {rowno}: expected {len(PAIR_CSV_COLUMNS)} fields")
        database, ref, dist, mos_text, type_text, level_text = row
        try:
            mos = float(mos_text)
        except ValueError as exc:
            raise ParseError(f"row {rowno}: unparseable MOS {mos_text!r}") from exc
        records.append(
            PairRecord(
                reference_id=ref,
                distorted_id=dist,
                mos=mos,
                database=database,
                distortion_type=int(type_text) if type_text else None,
                distortion_level=int(level_text) if level_text else None,
            )
        )
    return records


def write_records(path, records: Sequence[PairRecord]) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8")


def read_records(path) -> List[PairRecord]:
    return records_from_csv(Path(path).read_text(encoding="utf-8"))


def load_pairs(path, database: Optional[str] = None) -> List[PairRecord]:
    """Load pair records from any supported file, sniffing the format.

    Recognizes the canonical pair CSV, a KADID-style dmos CSV (header with a
    dist/ref/dmos triple), and TID ``mos_with_names`` text. ``database``
    labels raw TID files (default TID2013) and is ignored otherwise.
    """
    text = Path(path).read_text(encoding="utf-8")
    first = text.splitlines()[0].strip() if text.splitlines() else ""
    header = tuple(cell.strip().lower() for cell in first.split(","))
    if header == tuple(c.lower() for c in PAIR_CSV_COLUMNS):
        return records_from_csv(text)
    alias_hits = sum(
        any(alias in header for alias in aliases)
        for aliases in _KADID_COLUMN_ALIASES.values()
    )
    if alias_hits == len(_KADID_COLUMN_ALIASES):
        return parse_kadid_dmos(text)
    return parse_tid_mos(text, database=database or "TID2013")
