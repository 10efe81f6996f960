"""Seeded synthetic paired "modalities" with known ground truth.

Every pipeline stage gets a desk-scale oracle this way: identical pairs
must align perfectly, isometric pairs share spectra exactly, noisy
isometries degrade gracefully, and unaligned pairs must fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import EmbeddingMatrix

RELATIONS = ("identical", "isometric", "isometric_noisy", "unaligned")
STRUCTURES = ("gaussian_mixture", "swiss_roll")

# Mixture components must stay well separated relative to their spread.
COMPONENT_SIGMA = 1.0
MIN_CENTER_SEPARATION = 6.0 * COMPONENT_SIGMA


@dataclass(frozen=True)
class SyntheticPair:
    source: EmbeddingMatrix
    target: EmbeddingMatrix
    relation: str
    seed: int
    noise: float = 0.0
    planted_transform: np.ndarray | None = None


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian, sign-fixed."""
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]


def _mixture_cloud(n: int, d: int, components: int, rng: np.random.Generator) -> np.ndarray:
    centers = rng.normal(size=(components, d)) * 4.0
    if components > 1:
        diff = centers[:, None, :] - centers[None, :, :]
        pair_d = np.linalg.norm(diff, axis=2)
        pair_d[np.diag_indices(components)] = np.inf
        closest = pair_d.min()
        if closest < MIN_CENTER_SEPARATION:
            centers *= MIN_CENTER_SEPARATION / closest
    sizes = np.full(components, n // components)
    sizes[: n % components] += 1
    labels = np.repeat(np.arange(components), sizes)  # contiguous blocks
    return centers[labels] + rng.normal(size=(n, d)) * COMPONENT_SIGMA


def _swiss_roll(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 3:
        raise ValueError(f"swiss_roll needs d >= 3, got d={d}")
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.random(n))
    height = 21.0 * rng.random(n)
    X = np.zeros((n, d))
    X[:, 0] = t * np.cos(t)
    X[:, 1] = height
    X[:, 2] = t * np.sin(t)
    return X


def gen_base_cloud(
    n: int,
    d: int,
    structure: str = "gaussian_mixture",
    components: int = 3,
    seed: int = 0,
    knn_k: int | None = None,
) -> EmbeddingMatrix:
    """Deterministic structured point cloud for one synthetic modality.

    Args:
        structure: "gaussian_mixture" (well-separated components, assigned
            in contiguous index blocks) or "swiss_roll".
        knn_k: if given, enforce n >= 2*knn_k so the downstream graph is
            feasible.
    """
    if n < 2 or d < 1:
        raise ValueError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if knn_k is not None and n < 2 * knn_k:
        raise ValueError(f"n={n} too small for knn_k={knn_k}: need n >= 2*knn_k")
    rng = np.random.default_rng(seed)
    if structure == "gaussian_mixture":
        if components < 1 or components > n:
            raise ValueError(f"infeasible component count {components} for n={n}")
        data = _mixture_cloud(n, d, components, rng)
    elif structure == "swiss_roll":
        data = _swiss_roll(n, d, rng)
    else:
        raise ValueError(f"unknown structure {structure!r} (expected one of {STRUCTURES})")
    return EmbeddingMatrix(data, modality_tag=f"synth-{structure}-{seed}")


def gen_pair(
    base: EmbeddingMatrix,
    relation: str,
    noise: float = 0.0,
    seed: int = 0,
    structure: str | None = None,
    components: int = 3,
) -> SyntheticPair:
    """Derive the second modality from a base cloud under a known relation.

    identical:        Z_b = Z_a.
    isometric:        Z_b = Z_a Q for a planted random orthogonal Q.
    isometric_noisy:  as isometric, plus Gaussian noise whose expected
                      per-row norm is ``noise`` times the mean row norm
                      (entry std = noise * mean_norm / sqrt(d), so the
                      relative perturbation is dimension-free).
    unaligned:        fresh independent geometry: a new draw of
                      ``structure`` when given (same contiguous cluster
                      labels), else an isotropic Gaussian cloud.
    """
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r} (expected one of {RELATIONS})")
    if noise < 0:
        raise ValueError("noise scale must be nonnegative")
    n, d = base.n_points, base.dim
    rng = np.random.default_rng(seed)
    planted = None
    if relation == "identical":
        data = base.data.copy()
    elif relation in ("isometric", "isometric_noisy"):
        planted = random_orthogonal(d, rng)
        data = base.data @ planted
        if relation == "isometric_noisy" and noise > 0:
            mean_norm = float(np.linalg.norm(base.data, axis=1).mean())
            data = data + rng.normal(size=(n, d)) * (noise * mean_norm / np.sqrt(d))
    else:  # unaligned
        if structure is not None:
            fresh = gen_base_cloud(n, d, structure, components=components, seed=seed + 1)
            data = fresh.data.copy()
        else:
            data = rng.normal(size=(n, d))
    target = EmbeddingMatrix(data, modality_tag=f"{base.modality_tag}-{relation}")
    return SyntheticPair(
        source=base,
        target=target,
        relation=relation,
        seed=seed,
        noise=noise if relation == "isometric_noisy" else 0.0,
        planted_transform=planted,
    )
