"""Gaussian-weighted kNN affinity graphs and their normalized Laplacians.

Neighbors are found by exact brute-force distance evaluation; the bandwidth
is the mean distance to the k-th nearest neighbor over all points, computed
from the directed neighbor lists before symmetrization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .dataio import EmbeddingMatrix


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric nonnegative weight matrix with zero diagonal."""

    weights: sp.csr_matrix  # n x n
    bandwidth: float
    knn_k: int

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Laplacian:
    """Symmetric normalized graph Laplacian I - D^{-1/2} W D^{-1/2}."""

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _as_array(Z: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    if isinstance(Z, EmbeddingMatrix):
        return Z.data
    return np.asarray(Z, dtype=np.float64)


def knn_graph(Z: EmbeddingMatrix | np.ndarray, k: int) -> AffinityGraph:
    """Build the symmetrized Gaussian kNN graph of one embedding cloud.

    Edge (i, j) is present iff j is among i's k nearest neighbors or vice
    versa; its weight is exp(-||z_i - z_j||^2 / sigma^2) with sigma the mean
    k-th-neighbor distance. Distance ties break toward the lower index.

    Raises:
        ValueError: if k >= n, or if duplicated points drive sigma to zero.
    """
    X = _as_array(Z)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"knn_k must satisfy 1 <= k < n, got k={k} for n={n}")

    dist = cdist(X, X)  # exact, symmetric
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")  # stable sort: ties -> lower index
    neigh = order[:, :k]
    rows = np.arange(n)
    kth_dist = dist[rows, order[:, k - 1]]
    sigma = float(kth_dist.mean())
    if sigma <= 0.0:
        raise ValueError(
            "kNN bandwidth is zero: every point coincides with its k-th "
            "nearest neighbor (duplicate points); deduplicate the input"
        )

    src = np.repeat(rows, k)
    dst = neigh.ravel()
    w = np.exp(-(dist[src, dst] ** 2) / sigma**2)
    directed = sp.coo_matrix((w, (src, dst)), shape=(n, n)).tocsr()
    # union of directed edges; weights are symmetric so maximum() fills the
    # missing direction without double counting
    W = directed.maximum(directed.T)
    W.eliminate_zeros()

    n_comp, _ = connected_components(W, directed=False)
    if n_comp > 1:
        warnings.warn(
            f"kNN graph has {n_comp} connected components at k={k}; extra "
            "near-zero Laplacian modes will be dropped downstream",
            stacklevel=2,
        )
    return AffinityGraph(weights=W, bandwidth=sigma, knn_k=k)


def normalized_laplacian(graph: AffinityGraph) -> Laplacian:
    """Form L = I - D^{-1/2} W D^{-1/2}, symmetrized against round-off.

    Raises:
        ValueError: if some vertex has zero degree (isolated).
    """
    W = graph.weights
    n = W.shape[0]
    degrees = np.asarray(W.sum(axis=1)).ravel()
    dead = np.flatnonzero(degrees <= 0)
    if dead.size:
        raise ValueError(f"vertex {dead[0]} is isolated (zero degree); cannot normalize")
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(degrees))
    L = sp.identity(n, format="csr") - d_inv_sqrt @ W @ d_inv_sqrt
    L = ((L + L.T) * 0.5).tocsr()
    return Laplacian(matrix=L, degrees=degrees)


def dump_affinity_csv(graph: AffinityGraph, path: str | Path) -> None:
    """Debug dump of the weight matrix as "i,j,w" coordinate rows."""
    coo = graph.weights.tocoo()
    with open(path, "w") as fh:
        fh.write("i,j,w\n")
        for i, j, w in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i},{j},{w!r}\n")
