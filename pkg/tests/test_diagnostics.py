import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import commutativity_sum_form
from specalign.diagnostics import (
    SHAPE_MATCHING_PROFILE,
    commutativity_error,
    degenerate_indices,
    diagnostics_report,
    diagonal_dominance,
    orthogonality_error,
    spectral_distance,
)
from specalign.fmap import FunctionalMap


def spectrum(seed, k=10, lo=0.01, hi=2.0):
    return np.sort(np.random.default_rng(seed).uniform(lo, hi, k))


class TestSpectralDistance:
    def test_identical_spectra(self):
        v = spectrum(0)
        assert spectral_distance(v, v) == 0.0

    def test_scale_invariance(self):
        v = spectrum(1)
        assert spectral_distance(v, 3.7 * v) == pytest.approx(0.0, abs=1e-15)

    def test_symmetric(self):
        a, b = spectrum(2), spectrum(3)
        assert spectral_distance(a, b) == pytest.approx(spectral_distance(b, a))

    @given(st.integers(0, 300), st.floats(0.1, 50.0), st.floats(0.1, 50.0))
    @settings(max_examples=25, deadline=None)
    def test_independent_rescaling_invariant(self, seed, ca, cb):
        a, b = spectrum(seed), spectrum(seed + 1)
        base = spectral_distance(a, b)
        assert spectral_distance(ca * a, cb * b) == pytest.approx(base, abs=1e-12)

    def test_bounded_by_one(self):
        for seed in range(20):
            assert 0.0 <= spectral_distance(spectrum(seed), spectrum(seed + 50)) <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths differ"):
            spectral_distance(np.ones(3), np.ones(4))

    def test_zero_max_eigenvalue(self):
        with pytest.raises(ValueError, match="positive"):
            spectral_distance(np.zeros(3), np.ones(3))


class TestDiagonalDominance:
    def test_identity(self):
        rho, mean = diagonal_dominance(FunctionalMap(np.eye(7)))
        assert np.all(rho == 1.0) and mean == 1.0

    def test_cyclic_permutation(self):
        P = np.roll(np.eye(6), 1, axis=1)  # no fixed point
        rho, mean = diagonal_dominance(FunctionalMap(P))
        assert np.all(rho == 0.0) and mean == 0.0

    def test_scale_invariant(self):
        C = np.random.default_rng(0).normal(size=(8, 8))
        r1, m1 = diagonal_dominance(FunctionalMap(C))
        r2, m2 = diagonal_dominance(FunctionalMap(-13.0 * C))
        assert np.allclose(r1, r2) and m1 == pytest.approx(m2)

    def test_all_zero_row_warns(self):
        C = np.eye(4)
        C[2, :] = 0.0
        with pytest.warns(UserWarning, match="all-zero"):
            rho, mean = diagonal_dominance(FunctionalMap(C))
        assert rho[2] == 0.0
        assert mean == pytest.approx(3 / 4)

    def test_range(self):
        C = np.random.default_rng(1).normal(size=(10, 10))
        rho, _ = diagonal_dominance(FunctionalMap(C))
        assert np.all(rho >= 0.0) and np.all(rho <= 1.0)


class TestOrthogonalityError:
    def test_rotation_is_zero(self):
        theta = np.pi / 6
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        assert orthogonality_error(FunctionalMap(R)) <= 1e-12

    def test_scaled_identity_closed_form(self):
        # C = 2I at k=50: (1/50) * ||3I||_F = 3/sqrt(50)
        C = 2.0 * np.eye(50)
        assert orthogonality_error(FunctionalMap(C)) == pytest.approx(3.0 / np.sqrt(50.0))

    def test_left_orthogonal_invariance(self):
        rng = np.random.default_rng(2)
        C = rng.normal(size=(9, 9))
        q, _ = np.linalg.qr(rng.normal(size=(9, 9)))
        assert orthogonality_error(FunctionalMap(q @ C)) == pytest.approx(
            orthogonality_error(FunctionalMap(C)), abs=1e-10
        )


class TestCommutativityError:
    def test_identity_same_spectra(self):
        v = spectrum(0)
        assert commutativity_error(FunctionalMap(np.eye(10)), v, v) == 0.0

    def test_identity_different_spectra(self):
        a, b = spectrum(1), spectrum(2)
        expected = np.linalg.norm(a - b)
        assert commutativity_error(FunctionalMap(np.eye(10)), a, b) == pytest.approx(expected)

    def test_matches_sum_form(self):
        rng = np.random.default_rng(3)
        C = rng.normal(size=(8, 8))
        a, b = spectrum(4, 8), spectrum(5, 8)
        assert commutativity_error(FunctionalMap(C), a, b) == pytest.approx(
            commutativity_sum_form(C, a, b), abs=1e-12
        )

    def test_diagonal_map_same_spectra_commutes(self):
        v = spectrum(6)
        D = np.diag(np.random.default_rng(6).normal(size=10))
        assert commutativity_error(FunctionalMap(D), v, v) == pytest.approx(0.0, abs=1e-15)


class TestReport:
    def test_assembles_and_flags_degeneracy(self):
        vals = np.array([0.1, 0.2, 0.2 + 5e-9, 0.5])
        flagged = degenerate_indices(vals)
        assert np.array_equal(flagged, [1, 2])
        C = FunctionalMap(np.eye(4))
        rep = diagnostics_report(C, vals, vals)
        assert rep.spectral_distance == 0.0
        assert rep.diag_dominance_mean == 1.0
        assert rep.eigenvalue_range_source == (0.1, 0.5)
        assert np.array_equal(rep.degenerate_indices_source, [1, 2])

    def test_shape_matching_profile(self):
        vals = spectrum(7)
        good = diagnostics_report(FunctionalMap(np.eye(10)), vals, vals)
        assert SHAPE_MATCHING_PROFILE.passes(good)
        rng = np.random.default_rng(8)
        bad = diagnostics_report(FunctionalMap(rng.normal(size=(10, 10)) * 5), vals, spectrum(9))
        assert not SHAPE_MATCHING_PROFILE.passes(bad)
