"""Discrete-measure construction, serialization, samplers, and moments."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import conclab.measure as M


def two_atom_measure():
    return M.make_measure(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.5, 0.5]))


class TestConstruction:
    def test_two_atoms(self):
        meas = two_atom_measure()
        assert meas.n == 2 and meas.size == 2
        assert np.allclose(meas.norms, 1.0)

    def test_rejects_bad_weight_sum(self):
        with pytest.raises(M.MeasureValidationError, match="sum"):
            M.make_measure(np.eye(2), np.array([0.5, 0.4]))

    def test_renormalizes_small_drift(self):
        drift = 3e-7
        meas = M.make_measure(np.eye(2), np.array([0.5, 0.5 + drift]))
        assert abs(meas.weights.sum() - 1.0) <= 1e-9

    def test_keeps_weights_within_tight_tolerance(self):
        w = np.array([0.3, 0.7])
        meas = M.make_measure(np.eye(2), w)
        assert meas.weights[0] == 0.3 and meas.weights[1] == 0.7

    def test_rejects_origin_atom(self):
        with pytest.raises(M.MeasureValidationError, match="origin"):
            M.make_measure(np.array([[1.0, 0.0], [1e-13, 0.0]]))

    def test_rejects_negative_weight(self):
        with pytest.raises(M.MeasureValidationError):
            M.make_measure(np.eye(2), np.array([1.5, -0.5]))

    def test_rejects_non_finite(self):
        with pytest.raises(M.MeasureValidationError):
            M.make_measure(np.array([[np.inf, 0.0]]))

    def test_immutable(self):
        meas = two_atom_measure()
        with pytest.raises(ValueError):
            meas.atoms[0, 0] = 5.0


class TestCsvRoundTrip:
    def test_round_trip_bit_exact(self, tmp_path):
        g = np.random.default_rng(3)
        atoms = g.standard_normal((17, 5))
        weights = g.uniform(0.1, 1.0, 17)
        weights /= weights.sum()
        meas = M.make_measure(atoms, weights)
        path = tmp_path / "measure.csv"
        M.save_measure(meas, path)
        loaded = M.load_measure(path)
        assert np.array_equal(loaded.atoms, meas.atoms)
        assert np.array_equal(loaded.weights, meas.weights)

    def test_load_two_atom_file(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("weight,x1,x2\n0.5,1.0,0.0\n0.5,-1.0,0.0\n")
        meas = M.load_measure(path, expected_dim=2)
        assert meas.n == 2 and meas.size == 2

    def test_rejects_weight_sum_off(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("weight,x1\n0.5,1.0\n0.4,-1.0\n")
        with pytest.raises(M.MeasureValidationError, match="sum"):
            M.load_measure(path)

    def test_rejects_dimension_mismatch(self, tmp_path):
        path = tmp_path / "dim.csv"
        path.write_text("weight,x1,x2\n1.0,1.0,2.0\n")
        with pytest.raises(M.MeasureValidationError, match="dimension"):
            M.load_measure(path, expected_dim=3)

    def test_rejects_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("weight,x1,x2\n1.0,1.0\n")
        with pytest.raises(M.MeasureValidationError, match="fields"):
            M.load_measure(path)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "header.csv"
        path.write_text("w,x1\n1.0,1.0\n")
        with pytest.raises(M.MeasureValidationError, match="weight"):
            M.load_measure(path)


class TestCubeMeasure:
    def test_two_dim_atoms(self):
        meas = M.cube_measure(2)
        assert meas.size == 4
        assert set(map(tuple, meas.atoms.tolist())) == {
            (1, 1), (1, -1), (-1, 1), (-1, -1),
        }
        assert np.all(meas.weights == 0.25)

    @pytest.mark.parametrize("n", (2, 5, 9))
    def test_center_of_mass_exactly_zero(self, n):
        assert np.all(M.center_of_mass(M.cube_measure(n)) == 0.0)

    @pytest.mark.parametrize("n", (2, 4, 7))
    def test_cov1_scalar(self, n):
        matrix = M.cov1(M.cube_measure(n))
        assert np.allclose(matrix, np.eye(n) / math.sqrt(n), atol=1e-15)

    def test_enumeration_guard(self):
        with pytest.raises(ValueError, match="enumerat"):
            M.cube_measure(25)


class TestSamplers:
    def test_subset_atom_norms(self):
        sub = M.sample_cube_subset(6, 500, 1)
        assert np.allclose(sub.norms, math.sqrt(6), rtol=1e-15)

    def test_subset_center_small(self):
        sub = M.sample_cube_subset(10, 10_000, 7)
        # Binomial standard error: |center| concentrates near sqrt(n/N) ~ 0.03.
        assert np.linalg.norm(M.center_of_mass(sub)) <= 0.08

    def test_subset_cov1_diagonal(self):
        sub = M.sample_cube_subset(10, 2_000, 5)
        diag = np.diag(M.cov1(sub))
        assert np.allclose(diag, 1 / math.sqrt(10), rtol=1e-13)

    def test_subset_determinism(self):
        a = M.sample_cube_subset(5, 300, 11)
        b = M.sample_cube_subset(5, 300, 11)
        assert np.array_equal(a.atoms, b.atoms)

    def test_gaussian_covariance(self):
        n, count = 6, 40_000
        meas = M.sample_gaussian(n, count, 3)
        cov = (meas.atoms * meas.weights[:, None]).T @ meas.atoms
        assert np.max(np.abs(cov - np.eye(n))) <= 5 / math.sqrt(count)

    def test_laplace_variance(self):
        meas = M.sample_laplace_product(4, 40_000, 9)
        var = np.var(meas.atoms, axis=0)
        assert np.allclose(var, 2.0, atol=0.1)

    def test_uniform_cube_variance(self):
        meas = M.sample_uniform_cube(4, 40_000, 13)
        var = np.var(meas.atoms, axis=0)
        assert np.allclose(var, 1.0 / 3.0, atol=0.02)

    def test_rotation_orbit_norms(self):
        orbit = M.sample_rotation_orbit(5, 32, 2)
        assert np.allclose(orbit.norms, math.sqrt(5), rtol=1e-12)


class TestMomentFunctionals:
    @pytest.mark.parametrize("n", (2, 3, 5, 8, 10))
    def test_cube_moment_beta(self, n):
        assert M.moment_beta(M.cube_measure(n)) == pytest.approx(3 - 2 / n, rel=1e-12)

    @pytest.mark.parametrize("n", (2, 3, 5, 8, 10))
    def test_cube_moment_delta(self, n):
        expected = (n + 15 * n * (n - 1) + 15 * n * (n - 1) * (n - 2)) / n ** 3
        assert M.moment_delta(M.cube_measure(n)) == pytest.approx(expected, rel=1e-12)

    def test_gaussian_beta_spherical_limit(self):
        # For a rotation-invariant law the pair moment factorizes through the
        # direction moment E (theta . eta)^4 = 3/(n(n+2)), giving 3n/(n+2).
        n = 8
        meas = M.sample_gaussian(n, 20_000, 5)
        assert M.moment_beta(meas, threads=2) == pytest.approx(3 * n / (n + 2), abs=0.05)

    def test_orthogonal_invariance(self):
        meas = M.sample_gaussian(5, 400, 21)
        g = np.random.default_rng(4)
        q, r = np.linalg.qr(g.standard_normal((5, 5)))
        q *= np.sign(np.diag(r))
        rotated = meas.transformed(q)
        assert M.moment_beta(rotated) == pytest.approx(M.moment_beta(meas), rel=1e-10)
        assert M.moment_delta(rotated) == pytest.approx(M.moment_delta(meas), rel=1e-10)

    def test_thread_count_bit_exact(self):
        meas = M.sample_gaussian(6, 1500, 8)
        values = {t: M.moment_beta(meas, threads=t) for t in (1, 2, 4, 8)}
        assert len(set(values.values())) == 1

    def test_pair_cap(self):
        meas = M.sample_gaussian(3, 50, 1)
        with pytest.raises(M.PairCapExceeded):
            M.moment_beta(meas, cap=10)
        assert math.isfinite(M.moment_beta(meas, cap=None))

    def test_single_atom_cov1(self):
        meas = M.make_measure(np.array([[1.0, 0.0, 0.0]]))
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.array_equal(M.cov1(meas), expected)

    def test_cube_lp_covariance_p1(self):
        n = 6
        cube = M.cube_measure(n)
        assert np.allclose(M.lp_covariance(cube, 1), np.eye(n) / math.sqrt(n), atol=1e-15)
        assert M.lp_scale(cube, 1) == pytest.approx(1 / math.sqrt(n), rel=1e-14)

    @given(st.integers(0, 2 ** 32), st.floats(0.5, 3.5))
    @settings(max_examples=20, deadline=None)
    def test_trace_identity(self, seed, p):
        meas = M.sample_gaussian(4, 50, seed)
        trace = float(np.trace(M.lp_covariance(meas, p)))
        direct = float(meas.weights @ meas.norms ** p)
        assert trace == pytest.approx(direct, rel=1e-10)


class TestMomentReport:
    def test_cube_report(self):
        report = M.moment_report(M.cube_measure(6), p_values=(1.0, 2.0))
        assert report.kappa == 0.0
        assert report.lambda_ <= 1e-12
        assert report.zeta == pytest.approx(1.0, abs=1e-12)
        assert report.alpha == pytest.approx(1.0, rel=1e-14)
        assert report.beta == pytest.approx(3 - 2 / 6, rel=1e-12)
        assert report.gamma_excess == pytest.approx(-2.0, abs=1e-10)
        assert report.z_p[1.0] == pytest.approx(1 / math.sqrt(6), rel=1e-13)

    def test_cross_polytope_item4(self):
        # Only the 2n coincident/antipodal pairs contribute, so the plain
        # n * double-sum equals exactly 1 while the alpha-normalized ratio
        # blows up to n: the regularity assumption genuinely fails here.
        n = 7
        report = M.moment_report(M.cross_polytope_measure(n))
        assert report.beta_unscaled == pytest.approx(1.0, rel=1e-12)
        assert report.beta == pytest.approx(float(n), rel=1e-12)

    def test_subset_report(self):
        report = M.moment_report(M.sample_cube_subset(10, 10_000, 77))
        assert report.kappa <= 1.0
        assert report.lambda_ <= 1.0
        assert abs(report.zeta - 1.0) <= 1e-12

    def test_serialization(self):
        report = M.moment_report(M.cube_measure(4))
        data = report.to_dict()
        assert data["lambda"] == report.lambda_
        assert data["z_p"]["1.0"] == report.z_p[1.0]
