import numpy as np
import pytest

from specalign.baselines import (
    cca_scores,
    fit_cca,
    fit_procrustes,
    procrustes_scores,
    raw_cosine_scores,
    relative_representation,
    relative_scores,
)
from specalign.dataio import AnchorSet, sample_anchors
from specalign.retrieval import recall_at_k
from specalign.synth import random_orthogonal


def identity_anchors(n, budget=None, seed=0):
    return sample_anchors(n, budget or n, seed)


class TestRawCosine:
    def test_self_pair_diagonal_is_one(self):
        Z = np.random.default_rng(0).normal(size=(20, 6))
        sm = raw_cosine_scores(Z, Z)
        assert np.allclose(np.diag(sm.scores), 1.0)
        assert np.all(np.diag(sm.scores) >= sm.scores.max(axis=1) - 1e-12)

    def test_orthogonal_rows_score_zero(self):
        Z1 = np.array([[1.0, 0.0], [0.0, 2.0]])
        Z2 = np.array([[0.0, 1.0], [3.0, 0.0]])
        sm = raw_cosine_scores(Z1, Z2)
        assert np.allclose(np.diag(sm.scores), 0.0)

    def test_truncates_to_min_dim(self):
        rng = np.random.default_rng(1)
        Zv, Zt = rng.normal(size=(10, 8)), rng.normal(size=(10, 5))
        sm = raw_cosine_scores(Zv, Zt)
        ref = raw_cosine_scores(Zv[:, :5], Zt)
        assert np.allclose(sm.scores, ref.scores)

    def test_zero_norm_row_named(self):
        Z = np.ones((4, 3))
        Z[2] = 0.0
        with pytest.raises(ValueError, match="row 2"):
            raw_cosine_scores(Z, np.ones((4, 3)))


class TestProcrustes:
    def test_planted_rotation_recovered(self):
        rng = np.random.default_rng(2)
        d = 12
        Zv = rng.normal(size=(80, d))
        Q = random_orthogonal(d, rng)
        Zt = Zv @ Q
        alignment = fit_procrustes(Zv, Zt, identity_anchors(80, 40))
        assert np.max(np.abs(alignment.rotation - Q)) < 1e-6
        assert np.max(np.abs(alignment.rotation.T @ alignment.rotation - np.eye(d))) <= 1e-8

    def test_self_pair_identity(self):
        Z = np.random.default_rng(3).normal(size=(30, 7))
        alignment = fit_procrustes(Z, Z, identity_anchors(30, 15))
        assert np.allclose(alignment.rotation, np.eye(7), atol=1e-8)

    def test_single_anchor_2d_aligns_directions(self):
        # with one anchor pair the optimum maps the source direction onto
        # the target direction; verify against the closed-form 2D rotation
        zv = np.array([[2.0, 0.0], [0.0, 1.0]])
        theta = 0.7
        R_true = np.array(
            [[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]]
        ).T
        zt = zv @ R_true
        anchors = AnchorSet(np.array([[0, 0]]))
        alignment = fit_procrustes(zv, zt, anchors)
        u = zv[0] / np.linalg.norm(zv[0])
        v = zt[0] / np.linalg.norm(zt[0])
        assert np.allclose(u @ alignment.rotation, v, atol=1e-10)

    def test_optimality_against_random_rotations(self):
        rng = np.random.default_rng(4)
        Zv = rng.normal(size=(40, 6))
        Zt = rng.normal(size=(40, 6))
        anchors = identity_anchors(40, 25)
        alignment = fit_procrustes(Zv, Zt, anchors)
        Xs, Ys = Zv[anchors.source], Zt[anchors.target]
        best = np.linalg.norm(Xs @ alignment.rotation - Ys)
        for _ in range(100):
            Q = random_orthogonal(6, rng)
            assert best <= np.linalg.norm(Xs @ Q - Ys) + 1e-10

    def test_reflections_allowed(self):
        rng = np.random.default_rng(5)
        Zv = rng.normal(size=(50, 4))
        Q = random_orthogonal(4, rng)
        if np.linalg.det(Q) > 0:
            Q[:, 0] *= -1.0  # force det = -1
        Zt = Zv @ Q
        alignment = fit_procrustes(Zv, Zt, identity_anchors(50))
        assert np.linalg.det(alignment.rotation) == pytest.approx(-1.0)
        assert np.max(np.abs(alignment.rotation - Q)) < 1e-6

    def test_scores_perfect_on_planted(self):
        rng = np.random.default_rng(6)
        Zv = rng.normal(size=(40, 8))
        Zt = Zv @ random_orthogonal(8, rng)
        alignment = fit_procrustes(Zv, Zt, identity_anchors(40, 20))
        sm = procrustes_scores(alignment, Zv, Zt)
        assert recall_at_k(sm, [1])[1] == 100.0

    def test_centered_variant(self):
        rng = np.random.default_rng(7)
        Zv = rng.normal(size=(40, 5))
        Zt = (Zv - Zv.mean(0)) @ random_orthogonal(5, rng) + 100.0
        alignment = fit_procrustes(Zv, Zt, identity_anchors(40, 30), center=True)
        sm = procrustes_scores(alignment, Zv, Zt)
        assert recall_at_k(sm, [1])[1] == 100.0

    def test_zero_anchor_matrix_degenerate(self):
        Zv = np.vstack([np.zeros((1, 3)), np.eye(3), np.ones((1, 3))])
        Zt = Zv.copy()
        anchors = AnchorSet(np.array([[0, 0]]))  # the all-zero row
        with pytest.raises(ValueError, match="degenerate"):
            fit_procrustes(Zv, Zt, anchors)


class TestRelativeRepresentation:
    def test_point_equal_to_anchor(self):
        Z = np.random.default_rng(8).normal(size=(10, 4))
        rel = relative_representation(Z, np.array([0, 3]))
        assert rel.matrix[0, 0] == pytest.approx(1.0)
        assert rel.matrix[3, 1] == pytest.approx(1.0)
        assert np.all(rel.matrix <= 1.0 + 1e-12) and np.all(rel.matrix >= -1.0 - 1e-12)

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(9)
        Z = rng.normal(size=(25, 6))
        Q = random_orthogonal(6, rng)
        a = relative_representation(Z, np.arange(5)).matrix
        b = relative_representation(Z @ Q, np.arange(5)).matrix
        assert np.max(np.abs(a - b)) <= 1e-10

    def test_uniform_scaling_invariance(self):
        Z = np.random.default_rng(10).normal(size=(15, 3))
        a = relative_representation(Z, np.array([1, 2])).matrix
        b = relative_representation(7.3 * Z, np.array([1, 2])).matrix
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_cross_modal_scores_on_rotated_pair(self):
        rng = np.random.default_rng(11)
        Zv = rng.normal(size=(30, 5))
        Zt = Zv @ random_orthogonal(5, rng)
        sm = relative_scores(Zv, Zt, identity_anchors(30, 10, seed=3))
        assert recall_at_k(sm, [1])[1] == 100.0


class TestCca:
    def test_self_pair_correlations_near_one(self):
        rng = np.random.default_rng(12)
        Z = rng.normal(size=(300, 10))
        proj = fit_cca(Z, Z, identity_anchors(300, 300), n_components=5, ridge=1e-6)
        assert np.all(proj.correlations > 0.999)

    def test_correlations_sorted_in_unit_interval(self):
        rng = np.random.default_rng(13)
        Zv, Zt = rng.normal(size=(100, 8)), rng.normal(size=(100, 12))
        proj = fit_cca(Zv, Zt, identity_anchors(100, 80), n_components=6, ridge=1e-2)
        c = proj.correlations
        assert np.all(c >= 0.0) and np.all(c <= 1.0)
        assert np.all(np.diff(c) <= 1e-12)

    def test_infeasible_components(self):
        rng = np.random.default_rng(14)
        Zv, Zt = rng.normal(size=(50, 8)), rng.normal(size=(50, 8))
        with pytest.raises(ValueError, match="infeasible"):
            fit_cca(Zv, Zt, identity_anchors(50, 5), n_components=6)

    def test_singular_covariance_at_zero_ridge(self):
        # rank-deficient anchors: covariance is singular without a ridge
        rng = np.random.default_rng(15)
        low = rng.normal(size=(30, 2)) @ rng.normal(size=(2, 10))
        with pytest.raises(ValueError, match="ridge"):
            fit_cca(low, low, identity_anchors(30, 20), n_components=2, ridge=0.0)

    def test_scores_shape_and_self_recovery(self):
        rng = np.random.default_rng(16)
        Z = rng.normal(size=(60, 6))
        proj = fit_cca(Z, Z, identity_anchors(60, 50), n_components=4, ridge=1e-4)
        sm = cca_scores(proj, Z, Z)
        assert sm.scores.shape == (60, 60)
        assert recall_at_k(sm, [1])[1] == 100.0

    def test_independent_views_within_permutation_null(self):
        # mean canonical correlation of independent views sits inside the
        # band traced by re-fitting against permuted pairings
        rng = np.random.default_rng(17)
        n, d = 500, 50
        Zv, Zt = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        anchors = identity_anchors(n, n)
        observed = fit_cca(Zv, Zt, anchors, n_components=10, ridge=1e-3).correlations.mean()
        null = []
        for _ in range(20):
            perm = rng.permutation(n)
            pairs = np.stack([np.arange(n), perm], axis=1)
            proj = fit_cca(Zv, Zt, AnchorSet(pairs), n_components=10, ridge=1e-3)
            null.append(proj.correlations.mean())
        lo = np.mean(null) - 4 * np.std(null)
        hi = np.mean(null) + 4 * np.std(null)
        assert lo <= observed <= hi
