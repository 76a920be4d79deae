"""Fitting nonnegative per-channel weights against opinion scores.

The rank objective (Spearman between weighted distances and MOS) is piecewise
constant in the weights, so it cannot be ascended directly. Instead we run
projected gradient ascent on a differentiable Pearson surrogate computed on
the (optionally log-transformed) weighted distances, starting from all-ones
weights, and report the true Spearman score. Each step is backtracked until
the surrogate does not decrease, and the returned weights are the accepted
iterate with the best training Spearman score, so fine-tuning is a strict
refinement of the unweighted metric.

Everything operates on a precomputed ContributionTable: one row per image
pair, one column per channel (concatenated across the configured layers),
holding per-channel squared-distance contributions. The weighted distance of
a row is sqrt(sum_c w_c * k_c).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .archive import ArchiveReader
from .datasets import PairRecord
from .distances import ChannelWeights, channel_contributions, weighted_distance
from .errors import ArchiveError, FitError, ParseError
from .rankstats import POLARITIES, correlation_score

SURROGATES = ("pearson_on_distance", "pearson_on_log_distance")

_LOG_EPS = 1e-12  # floor for identical-image rows under the log surrogate
_LINE_SEARCH_TOL = 1e-9
_MAX_BACKTRACKS = 30

LayerSpan = Tuple[str, int, int]  # (layer name, first column, one past last)


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings; fixed iteration budget for reproducibility."""

    iterations: int = 200
    step_size: float = 0.25
    seed: int = 0
    surrogate: str = "pearson_on_distance"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ValueError(f"step_size must be positive and finite, got {self.step_size}")
        if self.surrogate not in SURROGATES:
            raise ValueError(f"unknown surrogate {self.surrogate!r}; expected one of {SURROGATES}")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "step_size": self.step_size,
            "seed": self.seed,
            "surrogate": self.surrogate,
        }


@dataclass
class ContributionTable:
    """Per-pair, per-channel squared-distance contributions plus MOS."""

    contributions: np.ndarray  # (n_pairs, n_channels) float64, >= 0
    mos: np.ndarray  # (n_pairs,)
    layer_spans: Tuple[LayerSpan, ...]

    def __post_init__(self):
        contribs = np.asarray(self.contributions, dtype=np.float64)
        mos = np.asarray(self.mos, dtype=np.float64)
        if contribs.ndim != 2:
            raise ValueError(f"contributions must be 2-D, got shape {contribs.shape}")
        if not np.isfinite(contribs).all():
            raise ValueError("contributions contain non-finite values")
        if np.any(contribs < 0):
            raise ValueError("contributions must be nonnegative")
        if mos.shape != (contribs.shape[0],):
            raise ValueError(f"{mos.shape[0]} MOS values for {contribs.shape[0]} rows")
        if not np.isfinite(mos).all():
            raise ValueError("MOS contains non-finite values")
        spans = tuple((str(n), int(a), int(b)) for n, a, b in self.layer_spans)
        cursor = 0
        for name, start, stop in spans:
            if start != cursor or stop <= start:
                raise ValueError(f"layer spans do not tile the columns: {spans}")
            cursor = stop
        if cursor != contribs.shape[1]:
            raise ValueError(
                f"spans cover {cursor} columns but table has {contribs.shape[1]}"
            )
        self.contributions = contribs
        self.mos = mos
        self.layer_spans = spans

    @property
    def n_pairs(self) -> int:
        return self.contributions.shape[0]

    @property
    def n_channels(self) -> int:
        return self.contributions.shape[1]

    def channels_by_layer(self) -> Dict[str, int]:
        return {name: stop - start for name, start, stop in self.layer_spans}


def build_contribution_table(
    reader: ArchiveReader,
    records: Sequence[PairRecord],
    layers: Sequence[str],
    strategy: str = "full",
    gram_normalize: bool = True,
) -> ContributionTable:
    """Precompute the weighting problem: one row per pair, columns concatenated
    over ``layers`` in the given order."""
    if not records:
        raise ValueError("no records")
    layers = list(layers)
    spans: List[LayerSpan] = []
    cursor = 0
    for name in layers:
        h, w, c = reader.manifest.layer(name).shape
        spans.append((name, cursor, cursor + c))
        cursor += c
    rows = np.empty((len(records), cursor), dtype=np.float64)
    for i, rec in enumerate(records):
        for (name, start, stop) in spans:
            try:
                ref = reader.tensor(rec.reference_id, name)
                dist = reader.tensor(rec.distorted_id, name)
            except ArchiveError as exc:
                raise ArchiveError(
                    f"pair ({rec.reference_id}, {rec.distorted_id}): {exc}"
                ) from exc
            rows[i, start:stop] = channel_contributions(
                ref, dist, strategy, gram_normalize=gram_normalize
            )
    mos = np.array([rec.mos for rec in records], dtype=np.float64)
    return ContributionTable(contributions=rows, mos=mos, layer_spans=tuple(spans))


def apply_weights(row, layer_spans: Sequence[LayerSpan], weights: ChannelWeights) -> float:
    """Weighted distance of one table row; weight vectors must match the spans."""
    row = np.asarray(row, dtype=np.float64)
    parts: List[np.ndarray] = []
    for name, start, stop in layer_spans:
        vec = weights.for_layer(name)
        if vec.shape[0] != stop - start:
            raise ValueError(
                f"span mismatch for layer {name!r}: {vec.shape[0]} weights for "
                f"{stop - start} channels"
            )
        parts.append(vec)
    if row.shape != (layer_spans[-1][2],):
        raise ValueError(f"row has {row.shape} entries, spans cover {layer_spans[-1][2]}")
    return weighted_distance(row, np.concatenate(parts))


def _weight_vector(table: ContributionTable, weights: ChannelWeights) -> np.ndarray:
    parts = []
    for name, start, stop in table.layer_spans:
        vec = weights.for_layer(name)
        if vec.shape[0] != stop - start:
            raise ValueError(
                f"span mismatch for layer {name!r}: {vec.shape[0]} weights for "
                f"{stop - start} channels"
            )
        parts.append(vec)
    return np.concatenate(parts)


def weighted_distances(table: ContributionTable, weights: ChannelWeights) -> np.ndarray:
    """Weighted distance per table row."""
    w = _weight_vector(table, weights)
    return np.sqrt(table.contributions @ w)


@dataclass
class FitReport:
    """What the optimizer did: surrogate trace and train-set Spearman scores."""

    surrogate_trace: List[float]
    spearman_initial: float
    spearman_final: float
    accepted_steps: int
    polarity: str
    surrogate: str


def _signed_pearson(d: np.ndarray, v: np.ndarray, svv: float, sign: float) -> Optional[float]:
    u = d - d.mean()
    suu = float(u @ u)
    if suu == 0.0 or not math.isfinite(suu):
        return None
    r = sign * float(u @ v) / math.sqrt(suu * svv)
    return r if math.isfinite(r) else None


def fit_channel_weights(
    table: ContributionTable, polarity: str, config: FitConfig
) -> Tuple[ChannelWeights, FitReport]:
    """Projected gradient ascent on the Pearson surrogate, from all-ones.

    Returns the accepted iterate with the best training Spearman score, so the
    fitted score is never below the all-ones score. The surrogate trace has
    the initial value followed by one entry per iteration; steps that fail the
    backtracking line search leave the iterate (and the trace value) in place.
    """
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}; expected one of {POLARITIES}")
    if table.n_pairs < 2:
        raise FitError(f"need at least 2 rows, got {table.n_pairs}")
    mos = table.mos
    if np.all(mos == mos[0]):
        raise FitError("constant MOS: correlation is undefined")

    K = table.contributions
    sign = -1.0 if polarity == "higher_is_better" else 1.0
    log_surrogate = config.surrogate == "pearson_on_log_distance"
    v = mos - mos.mean()
    svv = float(v @ v)

    def surrogate_value(s: np.ndarray) -> Optional[float]:
        d = 0.5 * np.log(s + _LOG_EPS) if log_surrogate else np.sqrt(s)
        return _signed_pearson(d, v, svv, sign)

    def spearman_score(s: np.ndarray) -> Optional[float]:
        d = np.sqrt(s)
        if np.all(d == d[0]):
            return None
        return correlation_score(d, mos, polarity)

    w = np.ones(table.n_channels, dtype=np.float64)
    s = K @ w
    current = surrogate_value(s)
    if current is None:
        raise FitError(
            "constant distances under all-ones weights at iteration 0: broken table"
        )
    initial_score = spearman_score(s)
    if initial_score is None:
        raise FitError("constant distances under all-ones weights at iteration 0")

    trace = [current]
    best_w = w.copy()
    best_score = initial_score
    accepted = 0

    for it in range(1, config.iterations + 1):
        # d(r)/d(d_p), then chain through d(d_p)/d(w_c)
        d = 0.5 * np.log(s + _LOG_EPS) if log_surrogate else np.sqrt(s)
        u = d - d.mean()
        suu = float(u @ u)
        if suu == 0.0:
            trace.append(current)
            continue
        suv = float(u @ v)
        grad_d = (v - (suv / suu) * u) / math.sqrt(suu * svv)
        if log_surrogate:
            chain = 0.5 / (s + _LOG_EPS)
        else:
            chain = np.divide(0.5, d, out=np.zeros_like(d), where=d > 0)
        grad = sign * (K.T @ (grad_d * chain))
        if not np.isfinite(grad).all():
            raise FitError(f"non-finite gradient at iteration {it}")
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            trace.append(current)
            continue
        # dimensionless step: scaled by the iterate's own magnitude
        step = config.step_size * max(float(np.linalg.norm(w)), 1.0) / gnorm
        moved = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = np.maximum(w + step * grad, 0.0)
            s_cand = K @ candidate
            value = surrogate_value(s_cand)
            if value is not None and value >= current - _LINE_SEARCH_TOL:
                w, s, current = candidate, s_cand, value
                moved = True
                break
            step *= 0.5
        trace.append(current)
        if moved:
            accepted += 1
            score = spearman_score(s)
            if score is not None and score > best_score:
                best_score = score
                best_w = w.copy()

    by_layer = {
        name: best_w[start:stop].copy() for name, start, stop in table.layer_spans
    }
    report = FitReport(
        surrogate_trace=trace,
        spearman_initial=initial_score,
        spearman_final=best_score,
        accepted_steps=accepted,
        polarity=polarity,
        surrogate=config.surrogate,
    )
    return ChannelWeights(by_layer), report


WEIGHTS_FORMAT = "featiq-weights-v1"


def write_weights(
    path,
    weights: ChannelWeights,
    fit_config: Optional[FitConfig] = None,
    training_database: Optional[str] = None,
    model_id: Optional[str] = None,
) -> None:
    """Serialize weights with fit provenance to a JSON text document."""
    doc = {
        "format": WEIGHTS_FORMAT,
        "provenance": {
            "training_database": training_database,
            "model_id": model_id,
            "fit_config": fit_config.to_dict() if fit_config else None,
        },
        "weights": {
            name: [float(x) for x in vec]
            for name, vec in sorted(weights.by_layer.items())
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_weights_document(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"unreadable weights file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != WEIGHTS_FORMAT:
        raise ParseError(f"{path} is not a {WEIGHTS_FORMAT} document")
    if "weights" not in doc or not isinstance(doc["weights"], dict):
        raise ParseError(f"{path} has no weights mapping")
    return doc


def read_weights(path) -> ChannelWeights:
    doc = read_weights_document(path)
    try:
        return ChannelWeights(
            {name: np.asarray(vec, dtype=np.float64) for name, vec in doc["weights"].items()}
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid weights in {path}: {exc}") from exc
