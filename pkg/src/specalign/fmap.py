"""Functional map estimation, refinement, and composition.

The map solve minimizes a descriptor-preservation term plus a Laplacian
commutativity penalty and Tikhonov regularization. Because the commutativity
penalty is diagonal in the matrix entries and the data term separates by
rows, each row of the map solves an independent ridge system; this
row-decoupled solver is the normative implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import AnchorSet
from .spectral import HksDescriptor, SpectralBasis


@dataclass(frozen=True)
class ProbeCoeffs:
    """Spectral coefficients of matched probe functions in the two bases."""

    source_coeffs: np.ndarray  # k_src x |S|
    target_coeffs: np.ndarray  # k_tgt x |S|

    def __post_init__(self):
        if self.source_coeffs.shape[1] != self.target_coeffs.shape[1]:
            raise ValueError(
                "probe column counts differ: "
                f"{self.source_coeffs.shape[1]} vs {self.target_coeffs.shape[1]}"
            )

    @property
    def num_probes(self) -> int:
        return self.source_coeffs.shape[1]


@dataclass(frozen=True)
class FunctionalMap:
    """Linear operator C taking source spectral coefficients to target ones.

    ``matrix`` is target_dim x source_dim; square in the default pipeline.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError(f"functional map must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("functional map contains non-finite entries")
        object.__setattr__(self, "matrix", m)

    @property
    def source_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def target_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_square(self) -> bool:
        return self.source_dim == self.target_dim


@dataclass(frozen=True)
class PointwiseMap:
    """Per-source-point index of the matched target point."""

    assignment: np.ndarray  # n_src, values in [0, n_tgt)


def probe_matrix(basis: SpectralBasis, anchors: np.ndarray, tau: float) -> np.ndarray:
    """Spectral coefficients of heat-smoothed indicators at the anchor points.

    Column s is exp(-Lambda * tau) * Phi^T e_{anchors[s]}: the indicator's
    coefficients, attenuated in the spectral domain. tau = 0 gives the raw
    indicator coefficients.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    if anchors.ndim != 1 or anchors.size == 0:
        raise ValueError("anchors must be a non-empty 1-D index list")
    if anchors.min() < 0 or anchors.max() >= basis.n_points:
        raise ValueError(f"anchor index out of range for n={basis.n_points}")
    if tau < 0:
        raise ValueError("probe smoothing tau must be nonnegative")
    decay = np.exp(-basis.values * tau)  # k
    return decay[:, None] * basis.vectors[anchors, :].T  # k x |S|


def anchor_probes(
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    anchor_set: AnchorSet,
    tau: float,
) -> ProbeCoeffs:
    """Probe coefficient pair for a supervised anchor set."""
    return ProbeCoeffs(
        source_coeffs=probe_matrix(basis_src, anchor_set.source, tau),
        target_coeffs=probe_matrix(basis_tgt, anchor_set.target, tau),
    )


def hks_probes(
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    hks_src: HksDescriptor,
    hks_tgt: HksDescriptor,
) -> ProbeCoeffs:
    """Probe coefficients from heat kernel signatures (one column per scale)."""
    if hks_src.num_scales != hks_tgt.num_scales:
        raise ValueError(
            f"HKS scale counts differ: {hks_src.num_scales} vs {hks_tgt.num_scales}"
        )
    return ProbeCoeffs(
        source_coeffs=basis_src.vectors.T @ hks_src.values,
        target_coeffs=basis_tgt.vectors.T @ hks_tgt.values,
    )


def solve_fmap(
    probes: ProbeCoeffs,
    values_src: np.ndarray,
    values_tgt: np.ndarray,
    lambda_comm: float,
    lambda_tik: float,
) -> FunctionalMap:
    """Closed-form solve of the regularized functional map objective.

    Row i of C solves the ridge system
        (A A^T + lambda_comm * diag_j((s_j - t_i)^2) + lambda_tik * I) c_i
            = A b_i^T
    with A, B the probe coefficients and s, t the source/target eigenvalues.

    Raises:
        RuntimeError: singular system (rank-deficient probes with
            lambda_tik = 0); increase lambda_tik.
    """
    A = probes.source_coeffs
    B = probes.target_coeffs
    s = np.asarray(values_src, dtype=np.float64).ravel()
    t = np.asarray(values_tgt, dtype=np.float64).ravel()
    k_src, k_tgt = A.shape[0], B.shape[0]
    if s.shape[0] != k_src or t.shape[0] != k_tgt:
        raise ValueError(
            f"eigenvalue lengths ({s.shape[0]}, {t.shape[0]}) do not match "
            f"probe dimensions ({k_src}, {k_tgt})"
        )
    if lambda_comm < 0 or lambda_tik < 0:
        raise ValueError("regularization weights must be nonnegative")

    gram = A @ A.T  # k_src x k_src
    rhs = A @ B.T  # k_src x k_tgt; column i is A b_i^T
    gaps = (s[None, :] - t[:, None]) ** 2  # k_tgt x k_src
    systems = np.broadcast_to(gram, (k_tgt, k_src, k_src)).copy()
    idx = np.arange(k_src)
    systems[:, idx, idx] += lambda_comm * gaps + lambda_tik
    try:
        rows = np.linalg.solve(systems, rhs.T[:, :, None])[..., 0]  # k_tgt x k_src
    except np.linalg.LinAlgError:
        raise RuntimeError(
            "functional map system is singular (rank-deficient probes); "
            "set lambda_tik > 0"
        ) from None
    if not np.all(np.isfinite(rows)):
        raise RuntimeError(
            "functional map solve produced non-finite entries; the system is "
            "numerically singular — set lambda_tik > 0"
        )
    return FunctionalMap(rows)


def solve_fmap_unsupervised(
    hks_src: HksDescriptor,
    hks_tgt: HksDescriptor,
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    lambda_comm: float,
    lambda_tik: float,
) -> FunctionalMap:
    """Anchor-free map solve with HKS columns as the probe functions."""
    probes = hks_probes(basis_src, basis_tgt, hks_src, hks_tgt)
    return solve_fmap(probes, basis_src.values, basis_tgt.values, lambda_comm, lambda_tik)


def pointwise_from_fmap(
    fmap: FunctionalMap, basis_src: SpectralBasis, basis_tgt: SpectralBasis
) -> PointwiseMap:
    """Nearest-neighbor matching in the mapped spectral coordinates.

    Source point i maps to argmin_j ||C phi_src(i) - phi_tgt(j)||; distance
    ties break toward the lower target index.
    """
    if basis_src.dim != fmap.source_dim or basis_tgt.dim != fmap.target_dim:
        raise ValueError(
            f"map is {fmap.target_dim}x{fmap.source_dim} but bases have dims "
            f"{basis_src.dim} (source), {basis_tgt.dim} (target)"
        )
    mapped = basis_src.vectors @ fmap.matrix.T  # n_src x k_tgt
    dist = cdist(mapped, basis_tgt.vectors)
    return PointwiseMap(assignment=dist.argmin(axis=1))


def fmap_from_pointwise(
    assignment: np.ndarray, basis_src: SpectralBasis, basis_tgt: SpectralBasis
) -> FunctionalMap:
    """Re-estimate the map from a pointwise correspondence: Phi_tgt^T P Phi_src.

    The adjoint (rather than a pseudoinverse) is exact here because the
    eigenvectors are orthonormal under the identity inner product.
    """
    return FunctionalMap(basis_tgt.vectors[assignment, :].T @ basis_src.vectors)


def orthogonal_projection(fmap: FunctionalMap) -> FunctionalMap:
    """Nearest orthogonal matrix via the SVD."""
    u, _, vt = np.linalg.svd(fmap.matrix)
    return FunctionalMap(u @ vt)


def zoomout_schedule(k_start: int, k_max: int, steps: int) -> list[int]:
    """Evenly spaced integer dimensions from k_start (exclusive) to k_max."""
    if not 1 <= k_start <= k_max:
        raise ValueError(f"need 1 <= k_start <= k_max, got {k_start}, {k_max}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    grid = np.linspace(k_start, k_max, steps + 1)[1:]
    return [int(round(v)) for v in grid]


def zoomout(
    fmap0: FunctionalMap,
    basis_src: SpectralBasis,
    basis_tgt: SpectralBasis,
    k_max: int,
    steps: int,
) -> FunctionalMap:
    """Iterative spectral upsampling with orthogonal projection.

    Each step recovers a pointwise map at the current dimension, re-estimates
    the functional map at the next dimension of an even schedule up to
    ``k_max``, and projects it onto the nearest orthogonal matrix. The output
    is always projected, hence exactly orthogonal.
    """
    if not fmap0.is_square:
        raise ValueError("zoomout expects a square initial map")
    k0 = fmap0.source_dim
    if k_max > min(basis_src.dim, basis_tgt.dim):
        raise ValueError(
            f"k_max={k_max} exceeds available basis dimensions "
            f"({basis_src.dim}, {basis_tgt.dim})"
        )
    current = fmap0
    k_current = k0
    for k_next in zoomout_schedule(k0, k_max, steps):
        pm = pointwise_from_fmap(
            current, basis_src.truncate(k_current), basis_tgt.truncate(k_current)
        )
        lifted = fmap_from_pointwise(
            pm.assignment, basis_src.truncate(k_next), basis_tgt.truncate(k_next)
        )
        current = orthogonal_projection(lifted)
        k_current = k_next
    return current


def compose(fmap_ab: FunctionalMap, fmap_bc: FunctionalMap) -> FunctionalMap:
    """Chain two maps: the a->c operator is the product C_bc @ C_ab."""
    if fmap_bc.source_dim != fmap_ab.target_dim:
        raise ValueError(
            f"cannot compose: inner dimensions differ "
            f"({fmap_ab.target_dim} -> {fmap_bc.source_dim})"
        )
    return FunctionalMap(fmap_bc.matrix @ fmap_ab.matrix)


def fmap_objective(
    C: np.ndarray,
    probes: ProbeCoeffs,
    values_src: np.ndarray,
    values_tgt: np.ndarray,
    lambda_comm: float,
    lambda_tik: float,
) -> float:
    """Value of the solve objective at a candidate map (for optimality checks)."""
    A, B = probes.source_coeffs, probes.target_coeffs
    s = np.asarray(values_src).ravel()
    t = np.asarray(values_tgt).ravel()
    data = np.linalg.norm(C @ A - B) ** 2
    comm = np.linalg.norm(C * s[None, :] - t[:, None] * C) ** 2
    return float(data + lambda_comm * comm + lambda_tik * np.linalg.norm(C) ** 2)
