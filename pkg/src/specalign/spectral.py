"""Truncated Laplacian eigenbases and Heat Kernel Signature descriptors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.sparse.linalg import ArpackNoConvergence

from .graph import Laplacian

# Eigenpairs below this are treated as trivial (constant / per-component
# indicator modes) and dropped from the basis.
TRIVIAL_EIGENVALUE_THRESHOLD = 1e-9

# Dense solves are exact and fast up to a few thousand points; above that,
# shift-inverted Lanczos.
DENSE_SOLVER_LIMIT = 2000

LANCZOS_TOL = 1e-10


@dataclass(frozen=True)
class SpectralBasis:
    """Non-trivial low eigenpairs of a normalized Laplacian.

    ``vectors`` has orthonormal columns, sign-normalized so that each
    column's largest-magnitude entry is positive; ``values`` is ascending.
    """

    vectors: np.ndarray  # n x k
    values: np.ndarray  # k, ascending, all > trivial threshold
    n_points: int

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def truncate(self, k: int) -> "SpectralBasis":
        if not 1 <= k <= self.dim:
            raise ValueError(f"cannot truncate basis of dimension {self.dim} to k={k}")
        if k == self.dim:
            return self
        return SpectralBasis(self.vectors[:, :k], self.values[:k], self.n_points)


@dataclass(frozen=True)
class HksDescriptor:
    """Heat kernel signatures: one row per point, one column per scale."""

    values: np.ndarray  # n x Q, nonnegative
    scales: np.ndarray  # Q, ascending

    @property
    def num_scales(self) -> int:
        return self.scales.shape[0]


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|entry| is positive (ties: lower index)."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        lead = np.argmax(np.abs(out[:, j]))
        if out[lead, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _dense_eigpairs(L: Laplacian, m: int) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = scipy.linalg.eigh(L.dense())
    return vals[:m], vecs[:, :m]


def _lanczos_eigpairs(L: Laplacian, m: int) -> tuple[np.ndarray, np.ndarray]:
    # Shift-invert around a negative sigma: L is PSD, so L - sigma*I is
    # positive definite and the factorization cannot fail; eigenvalues
    # nearest sigma are exactly the smallest ones.
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            L.matrix.tocsc(), k=m, sigma=-0.1, which="LM", tol=LANCZOS_TOL
        )
    except ArpackNoConvergence as exc:
        raise RuntimeError(f"Lanczos eigensolver failed to converge: {exc}") from exc
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def spectral_basis(L: Laplacian, k_s: int, method: str = "auto") -> SpectralBasis:
    """Compute the k_s smallest non-trivial eigenpairs of a Laplacian.

    All leading eigenpairs with eigenvalue below the trivial threshold are
    dropped (at least one — the constant mode; more when the graph is
    disconnected), and the window is enlarged and re-solved if that leaves
    fewer than k_s pairs.

    Args:
        L: normalized Laplacian.
        k_s: number of non-trivial eigenpairs to retain.
        method: "dense", "lanczos", or "auto" (dense up to
            ``DENSE_SOLVER_LIMIT`` points).
    """
    n = L.n_points
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    if k_s + 1 > n:
        raise ValueError(f"k_s={k_s} too large: need k_s + 1 <= n = {n}")
    if method == "auto":
        method = "dense" if n <= DENSE_SOLVER_LIMIT else "lanczos"
    if method not in ("dense", "lanczos"):
        raise ValueError(f"unknown eigensolver method {method!r}")

    window = k_s + 1
    while True:
        if method == "dense":
            # dense solve produces the full spectrum; grab everything once
            vals, vecs = _dense_eigpairs(L, n)
        else:
            vals, vecs = _lanczos_eigpairs(L, min(window, n - 1))
        n_trivial = max(int(np.searchsorted(vals, TRIVIAL_EIGENVALUE_THRESHOLD)), 1)
        if vals.shape[0] - n_trivial >= k_s:
            break
        if method == "dense" or window >= n - 1:
            raise ValueError(
                f"only {vals.shape[0] - n_trivial} non-trivial eigenpairs exist; "
                f"k_s={k_s} is too large for this graph"
            )
        window = min(n - 1, max(window * 2, k_s + n_trivial + 1))

    sel = slice(n_trivial, n_trivial + k_s)
    values = np.ascontiguousarray(vals[sel])
    vectors = normalize_signs(vecs[:, sel])
    return SpectralBasis(vectors=vectors, values=values, n_points=n)


def hks_scales(basis: SpectralBasis, num_scales: int) -> np.ndarray:
    """Geometric grid of diffusion times spanning the retained spectrum.

    Endpoints follow the usual heat-kernel convention 4*ln(10)/lambda at the
    largest and smallest retained eigenvalues; ascending.
    """
    if num_scales < 2:
        raise ValueError("need at least 2 HKS scales")
    lam_min = float(basis.values[0])
    lam_max = float(basis.values[-1])
    if lam_min <= 0:
        raise ValueError("HKS scales require strictly positive eigenvalues")
    t_short = 4.0 * np.log(10.0) / lam_max
    t_long = 4.0 * np.log(10.0) / lam_min
    return np.geomspace(t_short, t_long, num_scales)


def hks(basis: SpectralBasis, scales: np.ndarray) -> HksDescriptor:
    """Per-point heat kernel signature over the retained eigenpairs.

    HKS_t(i) = sum_j exp(-lambda_j * t) * phi_j(i)^2; sign-flip invariant.
    """
    scales = np.asarray(scales, dtype=np.float64)
    if scales.ndim != 1 or scales.size == 0:
        raise ValueError("scales must be a non-empty 1-D vector")
    if np.any(scales <= 0):
        raise ValueError("HKS scales must be positive")
    decay = np.exp(-np.outer(basis.values, scales))  # k x Q
    values = (basis.vectors**2) @ decay  # n x Q
    return HksDescriptor(values=values, scales=scales)
