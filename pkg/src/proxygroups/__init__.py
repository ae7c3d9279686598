"""Proxy demographic groups from embedding matrices.

Pipeline: embeddings -> t-SNE plane -> DBSCAN clusters -> balanced subsets
and group-fairness evaluation, for datasets without protected attributes.
"""

from ._version import __version__
from .data import (
    ClusterAssignment,
    EmbeddingMatrix,
    JoinedView,
    MetadataTable,
    ReducedCoordinates,
    SampleRecord,
    SubsetSelection,
    join,
    load_assignment,
    load_coordinates,
    load_embeddings,
    load_metadata,
    save_assignment,
    save_coordinates,
    save_embeddings,
    save_metadata,
)
from .dbscan import (
    ClusterParams,
    TuneResult,
    cluster_composition,
    dbscan,
    dbscan_labels,
    tune_dbscan,
)
from .fairness import (
    GroupedOutcomes,
    demographic_parity_gap,
    equalized_odds_gap,
    gap_improvement,
    group_outcomes,
    predictive_parity_gap,
    representation_gap,
)
from .kde import KdeCurve, kde, silverman_bandwidth
from .sampling import SamplingPlan, cluster_balanced_sample, random_sample
from .synth import SynthConfig, generate
from .tsne import (
    AffinityMatrix,
    TsneParams,
    TsneResult,
    calibrate_bandwidth,
    compute_affinities,
    gradient,
    gradient_bh,
    kl_objective,
    run_tsne,
)

__all__ = [
    "__version__",
    "ClusterAssignment",
    "ClusterParams",
    "EmbeddingMatrix",
    "GroupedOutcomes",
    "JoinedView",
    "KdeCurve",
    "MetadataTable",
    "ReducedCoordinates",
    "SampleRecord",
    "SamplingPlan",
    "SubsetSelection",
    "SynthConfig",
    "TsneParams",
    "TsneResult",
    "TuneResult",
    "AffinityMatrix",
    "calibrate_bandwidth",
    "cluster_balanced_sample",
    "cluster_composition",
    "compute_affinities",
    "dbscan",
    "dbscan_labels",
    "demographic_parity_gap",
    "equalized_odds_gap",
    "gap_improvement",
    "generate",
    "gradient",
    "gradient_bh",
    "group_outcomes",
    "join",
    "kde",
    "kl_objective",
    "load_assignment",
    "load_coordinates",
    "load_embeddings",
    "load_metadata",
    "predictive_parity_gap",
    "random_sample",
    "representation_gap",
    "run_tsne",
    "save_assignment",
    "save_coordinates",
    "save_embeddings",
    "save_metadata",
    "silverman_bandwidth",
    "tune_dbscan",
]
