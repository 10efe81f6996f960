"""End-to-end orchestration: embeddings -> bases -> maps -> scores -> recall.

This layer is what the CLI subcommands and the experiment scripts call; it
owns the pipeline conventions (bases are computed once at the largest
needed dimension and truncated; retrieval uses the refined map when
ZoomOut is enabled, while the raw solved map is what the diagnostics
describe in the dedicated diagnose flow).
"""

from __future__ import annotations

from dataclasses import dataclass

from .baselines import (
    cca_scores,
    fit_cca,
    fit_procrustes,
    procrustes_scores,
    raw_cosine_scores,
    relative_scores,
)
from .dataio import AnchorSet, EmbeddingMatrix, PipelineConfig
from .fmap import (
    FunctionalMap,
    anchor_probes,
    hks_probes,
    solve_fmap,
    zoomout,
)
from .graph import knn_graph, normalized_laplacian
from .retrieval import (
    RecallTable,
    ScoreMatrix,
    caption_space_recall,
    recall_at_k,
    required_image_cutoffs,
)
from .spectral import SpectralBasis, hks, hks_scales, spectral_basis

FMAP_METHODS = ("fmap", "fmap_hks")
BASELINE_METHODS = ("raw_cosine", "procrustes", "relative", "cca")
ALL_METHODS = FMAP_METHODS + BASELINE_METHODS

# CCA is skipped below this budget: the solution is hopelessly
# under-determined and the reference evaluation omits it.
CCA_MIN_ANCHORS = 20


def embedding_basis(
    Z: EmbeddingMatrix, knn_k: int, k_dim: int, method: str = "auto"
) -> SpectralBasis:
    """Graph -> normalized Laplacian -> truncated eigenbasis for one modality."""
    graph = knn_graph(Z, knn_k)
    lap = normalized_laplacian(graph)
    return spectral_basis(lap, k_dim, method=method)


@dataclass(frozen=True)
class FmapAlignment:
    """A solved (and optionally refined) map plus the bases it lives in."""

    raw_map: FunctionalMap  # solved at spectral_dim
    final_map: FunctionalMap  # ZoomOut output, or raw_map when refinement is off
    basis_src: SpectralBasis  # at the largest dimension the run needed
    basis_tgt: SpectralBasis
    refined: bool

    def retrieval_scores(self, direction: str = "i2t") -> ScoreMatrix:
        from .retrieval import spectral_scores

        k = self.final_map.source_dim
        return spectral_scores(
            self.final_map,
            self.basis_src.truncate(k),
            self.basis_tgt.truncate(k),
            direction=direction,
        )


def solve_alignment(
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    config: PipelineConfig,
    anchor_set: AnchorSet | None = None,
    use_zoomout: bool = True,
) -> FmapAlignment:
    """Solve the functional map at ``config.spectral_dim`` and refine it.

    With ``anchor_set`` the probes are smoothed anchor indicators; without
    one, heat kernel signatures at ``config.hks_num_scales`` scales (the
    unsupervised variant).
    """
    k_s = config.spectral_dim
    src = basis_src.truncate(k_s)
    tgt = basis_tgt.truncate(k_s)
    if anchor_set is not None:
        probes = anchor_probes(src, tgt, anchor_set, config.probe_smoothing)
    else:
        scales = hks_scales(src, config.hks_num_scales)
        probes = hks_probes(src, tgt, hks(src, scales), hks(tgt, scales))
    raw = solve_fmap(probes, src.values, tgt.values, config.lambda_comm, config.lambda_tik)
    if not use_zoomout:
        return FmapAlignment(raw, raw, basis_src, basis_tgt, refined=False)
    refined = zoomout(raw, basis_src, basis_tgt, config.zoomout_max, config.zoomout_steps)
    return FmapAlignment(raw, refined, basis_src, basis_tgt, refined=True)


def required_basis_dim(config: PipelineConfig, use_zoomout: bool) -> int:
    return max(config.spectral_dim, config.zoomout_max) if use_zoomout else config.spectral_dim


def baseline_scores(
    method: str,
    Zv: EmbeddingMatrix,
    Zt: EmbeddingMatrix,
    anchor_set: AnchorSet | None,
    cca_components: int | None = None,
    cca_ridge: float = 1e-3,
) -> ScoreMatrix:
    """Score matrix (source queries x target points) for one baseline method."""
    if method == "raw_cosine":
        return raw_cosine_scores(Zv, Zt)
    if anchor_set is None:
        raise ValueError(f"method {method!r} needs an anchor set")
    if method == "procrustes":
        alignment = fit_procrustes(Zv, Zt, anchor_set)
        return procrustes_scores(alignment, Zv, Zt)
    if method == "relative":
        return relative_scores(Zv, Zt, anchor_set)
    if method == "cca":
        limit = min(anchor_set.budget - 1, Zv.dim, Zt.dim)
        n_comp = cca_components if cca_components is not None else limit
        proj = fit_cca(Zv, Zt, anchor_set, n_components=n_comp, ridge=cca_ridge)
        return cca_scores(proj, Zv, Zt)
    raise ValueError(f"unknown baseline method {method!r}")


def evaluate_retrieval(
    scores_i2t: ScoreMatrix,
    cutoffs: tuple[int, ...],
    captions_per_image: int = 5,
) -> list[RecallTable]:
    """Recall tables for both directions under both protocols.

    Ground truth is row-order identity. Emits image-space and caption-space
    tables for i2t and t2i; the t2i direction scores are the transpose of
    the i2t matrix (queries are image-level caption means).
    """
    image_ks = required_image_cutoffs(cutoffs, captions_per_image)
    tables: list[RecallTable] = []
    for sm in (scores_i2t, scores_i2t.transpose()):
        image_full = recall_at_k(sm, image_ks)
        caption = caption_space_recall(image_full, captions_per_image)
        image = RecallTable(
            recalls={k: image_full.recalls[k] for k in cutoffs},
            direction=image_full.direction,
            protocol=image_full.protocol,
            n_queries=image_full.n_queries,
            n_targets=image_full.n_targets,
        )
        caption = RecallTable(
            recalls={k: caption.recalls[k] for k in cutoffs},
            direction=caption.direction,
            protocol=caption.protocol,
            n_queries=caption.n_queries,
            n_targets=caption.n_targets,
        )
        tables.extend([image, caption])
    return tables


def chance_recall(n_targets: int, cutoffs: tuple[int, ...]) -> dict[int, float]:
    """Analytic chance level: a random ranking hits the true match at K/N."""
    return {int(k): 100.0 * k / n_targets for k in cutoffs}
