"""featiq: perceptual image quality from deep feature-space distances.

Feature maps captured from pretrained networks are compared with four readout
strategies (full euclidean, spatial means, means+sigmas, Gram matrices),
scored against human mean-opinion databases via tie-aware Spearman
correlation, and optionally refined by fitting nonnegative per-channel
weights.
"""

from .archive import (
    ArchiveManifest,
    ArchiveReader,
    LayerDescriptor,
    as_feature_map,
    read_archive,
    validate_archive,
    validate_manifest,
    write_archive,
)
from .datasets import (
    PairRecord,
    SplitSpec,
    load_pairs,
    pair_manifest,
    parse_kadid_dmos,
    parse_tid_mos,
    read_records,
    split_records,
    write_records,
)
from .distances import (
    ChannelMoments,
    ChannelWeights,
    ReadoutConfig,
    STRATEGIES,
    channel_contributions,
    euclidean_distance,
    gram_distance,
    gram_matrix,
    mean_distance,
    mean_sigma_distance,
    multi_layer_distance,
    per_channel_squared_distances,
    spatial_moments,
    weighted_distance,
)
from .errors import ArchiveError, FeatIQError, FitError, ParseError
from .finetune import (
    ContributionTable,
    FitConfig,
    apply_weights,
    build_contribution_table,
    fit_channel_weights,
    read_weights,
    write_weights,
)
from .harness import (
    CorrelationReport,
    ReportRow,
    accuracy_correlation_table,
    emit_report,
    evaluate_layerwise,
    parse_report,
)
from .rankstats import POLARITIES, correlation_score, pearson, rank_with_ties, spearman
from .registry import DEFAULT_REGISTRY, ModelRegistryEntry, read_registry, write_registry

__version__ = "0.1.0"
