"""Training-free ambient-space alignment baselines.

All four methods consume the same embedding matrices as the spectral
pipeline and emit a ScoreMatrix for the retrieval evaluator: raw cosine
(the chance floor), orthogonal Procrustes, relative representations, and
regularized CCA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import AnchorSet, EmbeddingMatrix
from .retrieval import ScoreMatrix


def _rows(Z: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    if isinstance(Z, EmbeddingMatrix):
        return Z.data
    return np.asarray(Z, dtype=np.float64)


def _unit_rows(X: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    dead = np.flatnonzero(norms == 0.0)
    if dead.size:
        raise ValueError(f"zero-norm row {dead[0]} in {what}; cosine undefined")
    return X / norms[:, None]


def _truncate_pair(
    Zv: np.ndarray, Zt: np.ndarray, mode: str = "first"
) -> tuple[np.ndarray, np.ndarray, int]:
    """Bring both matrices to min(d_v, d_t) columns.

    "first" keeps the leading coordinates; "pca" projects each matrix onto
    its own top right-singular directions instead.
    """
    m = min(Zv.shape[1], Zt.shape[1])
    if mode == "first":
        return Zv[:, :m], Zt[:, :m], m
    if mode == "pca":
        out = []
        for Z in (Zv, Zt):
            if Z.shape[1] == m:
                out.append(Z)
            else:
                _, _, vt = np.linalg.svd(Z, full_matrices=False)
                out.append(Z @ vt[:m].T)
        return out[0], out[1], m
    raise ValueError(f"unknown truncation mode {mode!r}")


def cosine_score_matrix(A: np.ndarray, B: np.ndarray, direction: str = "i2t") -> ScoreMatrix:
    """Row-wise cosine similarities between two point sets."""
    return ScoreMatrix(
        _unit_rows(A, "query matrix") @ _unit_rows(B, "target matrix").T,
        direction=direction,
    )


def raw_cosine_scores(
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
    truncation: str = "first",
) -> ScoreMatrix:
    """Cosine similarity across the raw (dimension-truncated) features.

    Independently trained coordinate axes share no semantics, so this is
    the chance-level floor.
    """
    Xv, Xt, _ = _truncate_pair(_rows(Zv), _rows(Zt), truncation)
    return cosine_score_matrix(Xv, Xt)


# ---------------------------------------------------------------------------
# orthogonal Procrustes


@dataclass(frozen=True)
class ProcrustesAlignment:
    """Orthogonal rotation fitted on anchor rows (reflections allowed)."""

    rotation: np.ndarray  # m x m orthogonal
    truncation_dim: int
    center: bool = False
    mean_src: np.ndarray | None = None
    mean_tgt: np.ndarray | None = None


def fit_procrustes(
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
    anchors: AnchorSet,
    center: bool = False,
    truncation: str = "first",
) -> ProcrustesAlignment:
    """Least-squares orthogonal rotation aligning anchor rows.

    R = U V^T from the SVD of X_S^T Y_S minimizes ||X_S R - Y_S||_F over
    orthogonal R. Both matrices are truncated to min(d_v, d_t) first;
    centering is off by default.
    """
    Xv, Xt, m = _truncate_pair(_rows(Zv), _rows(Zt), truncation)
    Xs = Xv[anchors.source]
    Ys = Xt[anchors.target]
    mean_src = mean_tgt = None
    if center:
        mean_src, mean_tgt = Xs.mean(axis=0), Ys.mean(axis=0)
        Xs, Ys = Xs - mean_src, Ys - mean_tgt
    cross = Xs.T @ Ys
    if not np.any(cross):
        raise ValueError("anchor cross-covariance is zero; Procrustes is degenerate")
    u, _, vt = np.linalg.svd(cross)
    return ProcrustesAlignment(
        rotation=u @ vt,
        truncation_dim=m,
        center=center,
        mean_src=mean_src,
        mean_tgt=mean_tgt,
    )


def procrustes_scores(
    alignment: ProcrustesAlignment,
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
    truncation: str = "first",
) -> ScoreMatrix:
    """Cosine similarity after rotating the source features into the target space."""
    Xv, Xt, m = _truncate_pair(_rows(Zv), _rows(Zt), truncation)
    if m != alignment.truncation_dim:
        raise ValueError("embedding dimensions do not match the fitted alignment")
    if alignment.center:
        Xv = Xv - alignment.mean_src
        Xt = Xt - alignment.mean_tgt
    return cosine_score_matrix(Xv @ alignment.rotation, Xt)


# ---------------------------------------------------------------------------
# relative representations


@dataclass(frozen=True)
class RelativeRepresentation:
    """Each point re-coded by within-modality cosines to the anchor points."""

    matrix: np.ndarray  # n x |S|, entries in [-1, 1]


def relative_representation(
    Z: EmbeddingMatrix | np.ndarray, anchor_indices: np.ndarray
) -> RelativeRepresentation:
    X = _rows(Z)
    idx = np.asarray(anchor_indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("anchor_indices must be a non-empty 1-D index list")
    pts = _unit_rows(X, "embedding matrix")
    anch = _unit_rows(X[idx], "anchor rows")
    return RelativeRepresentation(matrix=pts @ anch.T)


def relative_scores(
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
    anchors: AnchorSet,
) -> ScoreMatrix:
    """Cosine similarity in the shared anchor-similarity coordinate system."""
    rel_v = relative_representation(Zv, anchors.source)
    rel_t = relative_representation(Zt, anchors.target)
    return cosine_score_matrix(rel_v.matrix, rel_t.matrix)


# ---------------------------------------------------------------------------
# regularized CCA


@dataclass(frozen=True)
class CcaProjection:
    """Paired projections onto maximally correlated directions."""

    proj_src: np.ndarray  # d_v x n_components
    proj_tgt: np.ndarray  # d_t x n_components
    mean_src: np.ndarray
    mean_tgt: np.ndarray
    correlations: np.ndarray  # n_components, nonincreasing


def _inv_sqrt_cov(X: np.ndarray, ridge: float) -> np.ndarray:
    n = X.shape[0]
    cov = X.T @ X / max(n - 1, 1) + ridge * np.eye(X.shape[1])
    vals, vecs = np.linalg.eigh(cov)
    if np.any(vals <= 0):
        raise ValueError(
            "singular anchor covariance; increase the CCA ridge (got ridge="
            f"{ridge})"
        )
    return vecs @ ((1.0 / np.sqrt(vals))[:, None] * vecs.T)


def fit_cca(
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
    anchors: AnchorSet,
    n_components: int,
    ridge: float = 1e-3,
) -> CcaProjection:
    """Regularized CCA on the anchor rows.

    Each view is whitened with (cov + ridge*I)^{-1/2}; the SVD of the
    whitened cross-covariance gives the paired projections and canonical
    correlations.
    """
    Xv, Xt = _rows(Zv), _rows(Zt)
    n_anchors = anchors.budget
    limit = min(n_anchors - 1, Xv.shape[1], Xt.shape[1])
    if not 1 <= n_components <= limit:
        raise ValueError(
            f"n_components={n_components} infeasible: needs 1 <= n <= "
            f"min(|S|-1, d_v, d_t) = {limit}"
        )
    Xs = Xv[anchors.source]
    Ys = Xt[anchors.target]
    mean_src, mean_tgt = Xs.mean(axis=0), Ys.mean(axis=0)
    Xs, Ys = Xs - mean_src, Ys - mean_tgt
    wx = _inv_sqrt_cov(Xs, ridge)
    wy = _inv_sqrt_cov(Ys, ridge)
    cross = Xs.T @ Ys / max(n_anchors - 1, 1)
    u, s, vt = np.linalg.svd(wx @ cross @ wy)
    return CcaProjection(
        proj_src=wx @ u[:, :n_components],
        proj_tgt=wy @ vt[:n_components].T,
        mean_src=mean_src,
        mean_tgt=mean_tgt,
        correlations=s[:n_components],
    )


def cca_scores(
    proj: CcaProjection,
    Zv: EmbeddingMatrix | np.ndarray,
    Zt: EmbeddingMatrix | np.ndarray,
) -> ScoreMatrix:
    """Cosine similarity in the shared canonical space."""
    a = (_rows(Zv) - proj.mean_src) @ proj.proj_src
    b = (_rows(Zt) - proj.mean_tgt) @ proj.proj_tgt
    return cosine_score_matrix(a, b)
