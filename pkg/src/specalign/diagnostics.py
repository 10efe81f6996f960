"""Spectral compatibility diagnostics for a solved functional map.

Three quantities decompose cross-modal compatibility: spectral distance
(do the manifolds have similar complexity?), diagonal dominance (do
spectral modes correspond index-to-index?), and orthogonality error (is
the correspondence isometric?). The Laplacian commutativity residual is
reported alongside.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .fmap import FunctionalMap

# Eigenvalues closer than this to a neighbor form a degenerate block whose
# eigenvector order is solver-dependent; per-index diagnostics are
# gauge-dependent there and get flagged.
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class ThresholdProfile:
    """Named pass/fail thresholds on the three diagnostics."""

    name: str
    max_spectral_distance: float
    min_diag_dominance_mean: float
    max_orthogonality_error: float

    def passes(self, report: "DiagnosticsReport") -> bool:
        return (
            report.spectral_distance < self.max_spectral_distance
            and report.diag_dominance_mean > self.min_diag_dominance_mean
            and report.orthogonality_error < self.max_orthogonality_error
        )


# Reference regime typical of near-isometric shape correspondence.
SHAPE_MATCHING_PROFILE = ThresholdProfile(
    name="shape_matching",
    max_spectral_distance=0.01,
    min_diag_dominance_mean=0.7,
    max_orthogonality_error=0.1,
)


@dataclass(frozen=True)
class DiagnosticsReport:
    spectral_distance: float
    diag_dominance: np.ndarray  # per-index rho_i in [0, 1]
    diag_dominance_mean: float
    orthogonality_error: float
    commutativity_error: float
    eigenvalue_range_source: tuple[float, float]
    eigenvalue_range_target: tuple[float, float]
    degenerate_indices_source: np.ndarray
    degenerate_indices_target: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "spectral_distance": self.spectral_distance,
            "diag_dominance": self.diag_dominance.tolist(),
            "diag_dominance_mean": self.diag_dominance_mean,
            "orthogonality_error": self.orthogonality_error,
            "commutativity_error": self.commutativity_error,
            "eigenvalue_range_source": list(self.eigenvalue_range_source),
            "eigenvalue_range_target": list(self.eigenvalue_range_target),
            "degenerate_indices_source": self.degenerate_indices_source.tolist(),
            "degenerate_indices_target": self.degenerate_indices_target.tolist(),
        }


def spectral_distance(values_src: np.ndarray, values_tgt: np.ndarray) -> float:
    """RMS difference of the two spectra after max-normalizing each.

    Dividing each spectrum by its own largest retained eigenvalue removes
    global scale, so this measures complexity similarity only.
    """
    a = np.asarray(values_src, dtype=np.float64).ravel()
    b = np.asarray(values_tgt, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"spectrum lengths differ: {a.shape[0]} vs {b.shape[0]}")
    if a[-1] <= 0 or b[-1] <= 0:
        raise ValueError("largest retained eigenvalue must be positive")
    return float(np.sqrt(np.mean((a / a[-1] - b / b[-1]) ** 2)))


def diagonal_dominance(fmap: FunctionalMap) -> tuple[np.ndarray, float]:
    """Fraction of each row's squared energy on the diagonal, and its mean.

    An all-zero row gets rho_i = 0 with a warning.
    """
    C = fmap.matrix
    if not fmap.is_square:
        raise ValueError("diagonal dominance requires a square map")
    row_energy = np.sum(C**2, axis=1)
    dead = row_energy == 0.0
    if np.any(dead):
        warnings.warn(
            f"{int(dead.sum())} all-zero row(s) in functional map; their "
            "diagonal dominance is reported as 0",
            stacklevel=2,
        )
    rho = np.zeros_like(row_energy)
    np.divide(np.diag(C) ** 2, row_energy, out=rho, where=~dead)
    return rho, float(rho.mean())


def orthogonality_error(fmap: FunctionalMap) -> float:
    """(1/k) * ||C^T C - I||_F; zero iff the map is orthogonal."""
    C = fmap.matrix
    if not fmap.is_square:
        raise ValueError("orthogonality error requires a square map")
    k = C.shape[0]
    return float(np.linalg.norm(C.T @ C - np.eye(k)) / k)


def commutativity_error(
    fmap: FunctionalMap, values_src: np.ndarray, values_tgt: np.ndarray
) -> float:
    """Frobenius norm of C Lambda_src - Lambda_tgt C."""
    C = fmap.matrix
    s = np.asarray(values_src, dtype=np.float64).ravel()
    t = np.asarray(values_tgt, dtype=np.float64).ravel()
    if s.shape[0] != fmap.source_dim or t.shape[0] != fmap.target_dim:
        raise ValueError("eigenvalue lengths do not match map dimensions")
    return float(np.linalg.norm(C * s[None, :] - t[:, None] * C))


def degenerate_indices(values: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Indices whose eigenvalue is within tol of an adjacent one."""
    v = np.asarray(values, dtype=np.float64).ravel()
    flag = np.zeros(v.shape[0], dtype=bool)
    close = np.abs(np.diff(v)) < tol
    flag[:-1] |= close
    flag[1:] |= close
    return np.flatnonzero(flag)


def diagnostics_report(
    fmap: FunctionalMap, values_src: np.ndarray, values_tgt: np.ndarray
) -> DiagnosticsReport:
    """Assemble the full diagnostics for one solved map and its spectra."""
    s = np.asarray(values_src, dtype=np.float64).ravel()
    t = np.asarray(values_tgt, dtype=np.float64).ravel()
    rho, rho_mean = diagonal_dominance(fmap)
    return DiagnosticsReport(
        spectral_distance=spectral_distance(s, t),
        diag_dominance=rho,
        diag_dominance_mean=rho_mean,
        orthogonality_error=orthogonality_error(fmap),
        commutativity_error=commutativity_error(fmap, s, t),
        eigenvalue_range_source=(float(s[0]), float(s[-1])),
        eigenvalue_range_target=(float(t[0]), float(t[-1])),
        degenerate_indices_source=degenerate_indices(s),
        degenerate_indices_target=degenerate_indices(t),
    )
