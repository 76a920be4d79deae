"""Feature-space distances between a reference image and a distorted one.

Four readout strategies turn a pair of (H, W, C) feature maps into a scalar:

* ``full``       - euclidean distance over every element
* ``mean``       - euclidean distance between per-channel spatial means
* ``mean_sigma`` - same, on the concatenation of means and standard deviations
* ``gram``       - Frobenius distance between the C x C Gram matrices

Every strategy decomposes into nonnegative per-channel squared contributions
whose sum is the squared distance, which is what makes per-channel weighting
and multi-layer concatenation uniform across strategies. All accumulation is
done in float64; inputs are float32 feature maps.

All functions here are pure; callers may evaluate image pairs concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

STRATEGIES = ("full", "mean", "mean_sigma", "gram")


def _as3d(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 3:
        raise ValueError(f"feature map must be (H, W, C), got shape {arr.shape}")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def euclidean_distance(a, b) -> float:
    """Euclidean distance over all H*W*C elements of two same-shape maps."""
    a, b = _as3d(a), _as3d(b)
    _check_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return math.sqrt(float(np.sum(diff * diff)))


@dataclass(frozen=True)
class ChannelMoments:
    """Per-channel spatial mean and population standard deviation."""

    means: np.ndarray
    sigmas: np.ndarray


def spatial_moments(a) -> ChannelMoments:
    """Mean and population std (divide by H*W) over spatial positions, per channel."""
    a = _as3d(a).astype(np.float64)
    means = a.mean(axis=(0, 1))
    sigmas = a.std(axis=(0, 1))  # ddof=0: descriptive statistic of the layer output
    return ChannelMoments(means=means, sigmas=sigmas)


def mean_distance(a, b) -> float:
    """Euclidean distance between the two per-channel spatial-mean vectors."""
    a, b = _as3d(a), _as3d(b)
    _check_same_shape(a, b)
    return math.sqrt(float(np.sum(channel_contributions(a, b, "mean"))))


def mean_sigma_distance(a, b) -> float:
    """Euclidean distance between concat(means, sigmas) vectors of length 2C."""
    a, b = _as3d(a), _as3d(b)
    _check_same_shape(a, b)
    return math.sqrt(float(np.sum(channel_contributions(a, b, "mean_sigma"))))


def gram_matrix(a, normalize: bool = True) -> np.ndarray:
    """C x C channel co-activation matrix, summed over spatial positions.

    With ``normalize`` the sum is divided by H*W so Gram entries are
    comparable across layers with different spatial sizes; ``normalize=False``
    gives the raw co-activation sum.
    """
    a = _as3d(a).astype(np.float64)
    h, w, c = a.shape
    flat = a.reshape(h * w, c)
    gram = flat.T @ flat
    if normalize:
        gram /= h * w
    return gram


def gram_distance(a, b, normalize: bool = True) -> float:
    """Frobenius distance between the Gram matrices of two maps.

    Spatial sizes may differ (the Gram matrix summarizes space); channel
    counts must match.
    """
    a, b = _as3d(a), _as3d(b)
    if a.shape[2] != b.shape[2]:
        raise ValueError(f"channel mismatch: {a.shape[2]} vs {b.shape[2]}")
    contribs = channel_contributions(a, b, "gram", gram_normalize=normalize)
    return math.sqrt(float(np.sum(contribs)))


def per_channel_squared_distances(a, b) -> np.ndarray:
    """Per-channel sums of squared element differences.

    sqrt of the sum over channels equals ``euclidean_distance(a, b)``; this is
    the decomposition that channel weighting operates on.
    """
    a, b = _as3d(a), _as3d(b)
    _check_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    return np.sum(diff * diff, axis=(0, 1))


def channel_contributions(a, b, strategy: str, gram_normalize: bool = True) -> np.ndarray:
    """Nonnegative per-channel squared contributions under ``strategy``.

    Sum over channels is the squared distance for that strategy. For ``gram``
    the contribution of channel c is the row sum of squared Gram-entry
    differences, so the total still equals the squared Frobenius distance.
    """
    a, b = _as3d(a), _as3d(b)
    if strategy == "full":
        return per_channel_squared_distances(a, b)
    if strategy == "mean":
        _check_same_shape(a, b)
        ma, mb = spatial_moments(a), spatial_moments(b)
        d = ma.means - mb.means
        return d * d
    if strategy == "mean_sigma":
        _check_same_shape(a, b)
        ma, mb = spatial_moments(a), spatial_moments(b)
        dm = ma.means - mb.means
        ds = ma.sigmas - mb.sigmas
        return dm * dm + ds * ds
    if strategy == "gram":
        if a.shape[2] != b.shape[2]:
            raise ValueError(f"channel mismatch: {a.shape[2]} vs {b.shape[2]}")
        dg = gram_matrix(a, normalize=gram_normalize) - gram_matrix(b, normalize=gram_normalize)
        return np.sum(dg * dg, axis=1)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def summary_length(strategy: str, shape) -> int:
    """Length of the flattened summary vector a strategy compares."""
    h, w, c = shape
    if strategy == "full":
        return h * w * c
    if strategy == "mean":
        return c
    if strategy == "mean_sigma":
        return 2 * c
    if strategy == "gram":
        return c * c
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def weighted_distance(contribs, weights) -> float:
    """sqrt(sum_c weights[c] * contribs[c]); all-ones weights reduce to the
    unweighted distance of the decomposition."""
    contribs = np.asarray(contribs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if contribs.shape != weights.shape or contribs.ndim != 1:
        raise ValueError(
            f"length mismatch: {contribs.shape} contributions vs {weights.shape} weights"
        )
    if np.any(weights < 0):
        raise ValueError("negative weight")
    return math.sqrt(float(np.dot(weights, contribs)))


@dataclass(frozen=True)
class ChannelWeights:
    """Nonnegative per-channel weights, one vector per layer name."""

    by_layer: Dict[str, np.ndarray]

    def __post_init__(self):
        clean: Dict[str, np.ndarray] = {}
        for name, vec in self.by_layer.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"weights for layer {name!r} must be a vector")
            if not np.isfinite(arr).all():
                raise ValueError(f"weights for layer {name!r} contain non-finite values")
            if np.any(arr < 0):
                raise ValueError(f"weights for layer {name!r} contain negative values")
            clean[name] = arr
        object.__setattr__(self, "by_layer", clean)

    def layers(self) -> Tuple[str, ...]:
        return tuple(self.by_layer)

    def for_layer(self, name: str) -> np.ndarray:
        if name not in self.by_layer:
            raise ValueError(f"no weights for layer {name!r}")
        return self.by_layer[name]

    @classmethod
    def ones(cls, channels_by_layer: Mapping[str, int]) -> "ChannelWeights":
        return cls({name: np.ones(c) for name, c in channels_by_layer.items()})


@dataclass(frozen=True)
class ReadoutConfig:
    """How feature maps become a distance: strategy, layers, concatenation,
    optional per-channel weights, and the two normalization switches."""

    strategy: str
    layers: Tuple[str, ...]
    concatenate: bool = False
    weights: Optional[ChannelWeights] = None
    gram_normalize: bool = True
    normalize_layers: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("at least one layer required")
        if len(set(layers)) != len(layers):
            raise ValueError(f"duplicate layer in {layers}")
        object.__setattr__(self, "layers", layers)
        if self.weights is not None:
            missing = [l for l in layers if l not in self.weights.by_layer]
            if missing:
                raise ValueError(f"weights missing for layers {missing}")


def readout_squared_distance(a, b, layer: str, config: ReadoutConfig) -> float:
    """Squared distance of one layer under the configured strategy, weights,
    and normalization switches."""
    contribs = channel_contributions(a, b, config.strategy, config.gram_normalize)
    if config.weights is not None:
        w = config.weights.for_layer(layer)
        if w.shape != contribs.shape:
            raise ValueError(
                f"layer {layer!r}: {w.shape[0]} weights for {contribs.shape[0]} channels"
            )
        sq = float(np.dot(w, contribs))
    else:
        sq = float(np.sum(contribs))
    if config.normalize_layers:
        sq /= summary_length(config.strategy, a.shape)
    return sq


def multi_layer_distance(
    maps_a: Mapping[str, np.ndarray],
    maps_b: Mapping[str, np.ndarray],
    config: ReadoutConfig,
) -> Union[float, Dict[str, float]]:
    """Distance(s) between two images given their per-layer feature maps.

    With ``config.concatenate`` the per-layer squared distances are summed
    under one outer sqrt, which equals concatenating the per-layer summary
    vectors before applying the euclidean distance. Otherwise one distance is
    returned per layer.
    """
    squared: Dict[str, float] = {}
    for layer in config.layers:
        if layer not in maps_a or layer not in maps_b:
            raise ValueError(f"missing layer {layer!r}")
        squared[layer] = readout_squared_distance(maps_a[layer], maps_b[layer], layer, config)
    if config.concatenate:
        return math.sqrt(sum(squared.values()))
    return {layer: math.sqrt(sq) for layer, sq in squared.items()}
