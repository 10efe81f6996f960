"""Spectral bases, functional maps, and compatibility diagnostics for
cross-modal embedding spaces."""

__version__ = "0.1.0"

from .baselines import (
    CcaProjection,
    ProcrustesAlignment,
    RelativeRepresentation,
    cca_scores,
    fit_cca,
    fit_procrustes,
    procrustes_scores,
    raw_cosine_scores,
    relative_representation,
    relative_scores,
)
from .dataio import (
    AnchorSet,
    EmbeddingMatrix,
    PipelineConfig,
    load_anchor_set,
    load_embeddings,
    load_matrix,
    load_report,
    sample_anchors,
    write_embeddings,
    write_matrix,
    write_report,
)
from .diagnostics import (
    SHAPE_MATCHING_PROFILE,
    DiagnosticsReport,
    ThresholdProfile,
    commutativity_error,
    diagnostics_report,
    diagonal_dominance,
    orthogonality_error,
    spectral_distance,
)
from .fmap import (
    FunctionalMap,
    PointwiseMap,
    ProbeCoeffs,
    anchor_probes,
    compose,
    hks_probes,
    pointwise_from_fmap,
    probe_matrix,
    solve_fmap,
    solve_fmap_unsupervised,
    zoomout,
)
from .graph import AffinityGraph, Laplacian, knn_graph, normalized_laplacian
from .pipeline import (
    FmapAlignment,
    baseline_scores,
    embedding_basis,
    evaluate_retrieval,
    solve_alignment,
)
from .retrieval import (
    RecallTable,
    ScoreMatrix,
    caption_space_recall,
    recall_at_k,
    spectral_scores,
)
from .spectral import (
    HksDescriptor,
    SpectralBasis,
    hks,
    hks_scales,
    spectral_basis,
)
from .synth import SyntheticPair, gen_base_cloud, gen_pair, random_orthogonal

__all__ = [name for name in dir() if not name.startswith("_")]
