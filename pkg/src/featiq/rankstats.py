"""Tie-aware rank statistics.

Spearman here is the Pearson correlation of fractional ranks, not the d^2
shortcut formula: the opinion-score databases contain tied values and the
shortcut is biased under ties. Constant series are an error rather than a
silent zero, because a constant distance column indicates a broken readout.
"""

from __future__ import annotations

import math

import numpy as np

POLARITIES = ("higher_is_better", "higher_is_worse")


def _as_series(values, name: str = "series") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def rank_with_ties(values) -> np.ndarray:
    """Fractional ranks in [1, N]; tied values share the average of the ranks
    they span, so the ranks always sum to N(N+1)/2 exactly."""
    arr = _as_series(values)
    n = arr.size
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    # run boundaries of equal values in sorted order
    is_run_start = np.empty(n, dtype=bool)
    is_run_start[0] = True
    is_run_start[1:] = sorted_vals[1:] != sorted_vals[:-1]
    run_id = np.cumsum(is_run_start) - 1
    counts = np.bincount(run_id)
    ends = np.cumsum(counts)  # 1-based rank of each run's last element
    starts = ends - counts + 1
    avg_rank = (starts + ends) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = avg_rank[run_id]
    return ranks


def pearson(x, y) -> float:
    """Centered product-moment correlation; errors on zero variance."""
    x = _as_series(x, "x")
    y = _as_series(y, "y")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    u = x - x.mean()
    v = y - y.mean()
    suu = float(u @ u)
    svv = float(v @ v)
    if suu == 0.0 or svv == 0.0:
        raise ValueError("undefined correlation: series has zero variance")
    r = float(u @ v) / math.sqrt(suu * svv)
    return min(1.0, max(-1.0, r))


def spearman(x, y) -> float:
    """Pearson correlation of the tie-aware ranks of x and y."""
    x = _as_series(x, "x")
    y = _as_series(y, "y")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("undefined correlation: series is constant")
    return pearson(rank_with_ties(x), rank_with_ties(y))


def correlation_score(distances, mos, polarity: str) -> float:
    """Signed agreement between model distances and opinion scores.

    When higher MOS means better quality a good metric anti-correlates with
    MOS, so the score is -spearman; under higher-is-worse it is +spearman.
    A perfect metric scores +1 either way.
    """
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}; expected one of {POLARITIES}")
    rho = spearman(distances, mos)
    return -rho if polarity == "higher_is_better" else rho
