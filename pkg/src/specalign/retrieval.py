"""Cross-modal retrieval scoring and Recall@K evaluation.

Ground truth is row-order identity unless an explicit assignment is given.
Score ties break toward the lower target index so recall is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fmap import FunctionalMap
from .spectral import SpectralBasis

IMAGE_SPACE = "image_space"
CAPTION_SPACE = "caption_space"


@dataclass(frozen=True)
class ScoreMatrix:
    """Similarity scores, one row per query; larger means more similar."""

    scores: np.ndarray  # n_queries x n_targets
    direction: str = "i2t"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError(f"score matrix must be 2-D, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("score matrix contains non-finite entries")
        if self.direction not in ("i2t", "t2i"):
            raise ValueError(f"direction must be 'i2t' or 't2i', got {self.direction!r}")
        object.__setattr__(self, "scores", s)

    def transpose(self) -> "ScoreMatrix":
        flipped = "t2i" if self.direction == "i2t" else "i2t"
        return ScoreMatrix(self.scores.T, direction=flipped)


@dataclass(frozen=True)
class RecallTable:
    """Recall@K percentages for one direction under one protocol."""

    recalls: dict[int, float]  # K -> percentage in [0, 100]
    direction: str
    protocol: str = IMAGE_SPACE
    n_queries: int = 0
    n_targets: int = 0

    def __getitem__(self, k: int) -> float:
        return self.recalls[k]

    def to_dict(self) -> dict[str, float]:
        return {str(k): self.recalls[k] for k in sorted(self.recalls)}


def spectral_scores(
    fmap: FunctionalMap,
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    direction: str = "i2t",
) -> ScoreMatrix:
    """Negative squared distance between mapped source and target coordinates.

    Computed via the inner-product expansion -(|a|^2 + |b|^2 - 2 a.b) rather
    than forming per-pair differences.
    """
    if basis_src.dim != fmap.source_dim or basis_tgt.dim != fmap.target_dim:
        raise ValueError(
            f"map is {fmap.target_dim}x{fmap.source_dim} but bases have dims "
            f"{basis_src.dim} (source), {basis_tgt.dim} (target)"
        )
    mapped = basis_src.vectors @ fmap.matrix.T  # n_src x k_tgt
    sq_src = np.sum(mapped**2, axis=1)
    sq_tgt = np.sum(basis_tgt.vectors**2, axis=1)
    scores = -(sq_src[:, None] + sq_tgt[None, :] - 2.0 * mapped @ basis_tgt.vectors.T)
    return ScoreMatrix(scores, direction=direction)


def recall_at_k(
    score_matrix: ScoreMatrix,
    cutoffs: list[int] | tuple[int, ...],
    ground_truth: np.ndarray | None = None,
) -> RecallTable:
    """Fraction of queries whose true match ranks in the top K.

    The true match for query i is column i (row-order identity; requires a
    square matrix) unless ``ground_truth`` gives explicit target indices.
    The rank of the true match counts targets with strictly higher score
    plus equal-score targets at lower index.
    """
    S = score_matrix.scores
    n_q, n_t = S.shape
    if ground_truth is None:
        if n_q != n_t:
            raise ValueError(
                f"row-order ground truth needs a square score matrix, got {n_q}x{n_t}"
            )
        ground_truth = np.arange(n_q)
    else:
        ground_truth = np.asarray(ground_truth, dtype=np.int64)
        if ground_truth.shape != (n_q,):
            raise ValueError("ground truth must assign one target per query")
        if ground_truth.min() < 0 or ground_truth.max() >= n_t:
            raise ValueError("ground-truth index out of range")
    cutoffs = sorted({int(k) for k in cutoffs})
    if not cutoffs:
        raise ValueError("need at least one recall cutoff")
    if cutoffs[-1] > n_t:
        raise ValueError(f"recall cutoff {cutoffs[-1]} exceeds {n_t} targets")

    true_scores = S[np.arange(n_q), ground_truth]
    better = np.sum(S > true_scores[:, None], axis=1)
    col = np.arange(n_t)
    tied_before = np.sum((S == true_scores[:, None]) & (col[None, :] < ground_truth[:, None]), axis=1)
    rank = better + tied_before  # 0-based rank under descending stable order
    recalls = {k: float(np.mean(rank < k) * 100.0) for k in cutoffs}
    return RecallTable(
        recalls=recalls,
        direction=score_matrix.direction,
        protocol=IMAGE_SPACE,
        n_queries=n_q,
        n_targets=n_t,
    )


def caption_space_recall(image_table: RecallTable, captions_per_image: int) -> RecallTable:
    """Translate image-space recall to the caption-space protocol.

    With ``c`` equivalent captions per image sharing one score, retrieving
    any of the true image's captions in the top K is the same as the image
    ranking in the top ceil(K/c); so i2t R@K maps to image-space
    R@ceil(K/c). Text-to-image queries are unchanged (they are already
    image-level).
    """
    if captions_per_image < 1:
        raise ValueError("captions_per_image must be >= 1")
    if image_table.protocol != IMAGE_SPACE:
        raise ValueError(f"expected an image-space table, got {image_table.protocol!r}")
    if image_table.direction == "t2i" or captions_per_image == 1:
        recalls = dict(image_table.recalls)
    else:
        recalls = {}
        for k in image_table.recalls:
            need = math.ceil(k / captions_per_image)
            if need not in image_table.recalls:
                raise ValueError(
                    f"caption-space R@{k} needs image-space R@{need}, which is missing"
                )
            recalls[k] = image_table.recalls[need]
    return RecallTable(
        recalls=recalls,
        direction=image_table.direction,
        protocol=CAPTION_SPACE,
        n_queries=image_table.n_queries,
        n_targets=image_table.n_targets,
    )


def required_image_cutoffs(cutoffs: list[int] | tuple[int, ...], captions_per_image: int) -> list[int]:
    """Image-space cutoffs needed to derive caption-space recall at ``cutoffs``."""
    need = set(int(k) for k in cutoffs)
    need.update(math.ceil(k / captions_per_image) for k in cutoffs)
    return sorted(need)


def recall_tables_to_dict(tables: list[RecallTable]) -> dict[str, dict[str, dict[str, float]]]:
    """Nest tables as {protocol: {direction: {K: recall}}}."""
    out: dict[str, dict[str, dict[str, float]]] = {}
    for t in tables:
        out.setdefault(t.protocol, {})[t.direction] = t.to_dict()
    return out
