"""Closed-form kernels against quadrature, Monte Carlo, and series oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import conclab.kernels as K
from conclab.rng import sample_sphere

DIMS = (1, 2, 3, 5, 8, 21, 64, 1000)


class TestPolarConstant:
    @pytest.mark.parametrize("n", DIMS)
    def test_order_two_is_dimension(self, n):
        assert K.polar_constant(n, 2) == float(n)

    @pytest.mark.parametrize("n", DIMS)
    def test_order_zero_is_one(self, n):
        assert K.polar_constant(n, 0) == 1.0

    def test_two_dim_order_one_against_quadrature(self):
        # Oracle: the spherical mean of (cos phi)_+ over the circle is 1/pi,
        # and the Gaussian mean of a 1-homogeneous plus-part is 1/sqrt(2 pi).
        circle_mean, err = quad(lambda phi: max(math.cos(phi), 0.0), 0.0, 2 * math.pi)
        circle_mean /= 2 * math.pi
        assert err < 1e-12
        expected = 1.0 / (math.sqrt(2 * math.pi) * circle_mean)
        assert K.polar_constant(2, 1) == pytest.approx(expected, rel=1e-12)
        assert K.polar_constant(2, 1) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-14)

    def test_large_n_no_overflow(self):
        value = K.polar_constant(4096, 3)
        assert math.isfinite(value) and value > 0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            K.polar_constant(0, 1)
        with pytest.raises(ValueError):
            K.polar_constant(4, -1)


class TestPlusMean:
    def test_circle_value(self):
        assert K.plus_mean(2) == pytest.approx(1 / math.pi, rel=1e-13)

    def test_zero_sphere_value(self):
        # S^0 = {-1, +1}: the average of the plus part is 1/2.
        assert K.plus_mean(1) == pytest.approx(0.5, rel=1e-14)

    def test_monte_carlo_n64(self):
        n = 64
        theta = sample_sphere(101, n, 1_000_000)
        samples = np.maximum(theta[:, 0], 0.0)
        est = samples.mean()
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(est - K.plus_mean(n)) <= 4 * se


class TestPairKernels:
    @pytest.mark.parametrize("n", (1, 2, 7, 100))
    def test_plus_pair_endpoints(self, n):
        assert K.plus_pair_kernel(1.0, n) == 0.5 / n
        assert K.plus_pair_kernel(-1.0, n) == 0.0

    def test_plus_pair_monte_carlo(self):
        n, t = 8, 0.3
        theta = sample_sphere(7, n, 1_000_000)
        xi = np.zeros(n)
        xi[0], xi[1] = t, math.sqrt(1 - t * t)
        samples = np.maximum(theta[:, 0], 0.0) * np.maximum(theta @ xi, 0.0)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - K.plus_pair_kernel(t, n)) <= 4 * se

    def test_halfspace_values(self):
        assert K.halfspace_pair_kernel(1.0) == pytest.approx(0.5, abs=1e-15)
        assert K.halfspace_pair_kernel(-1.0) == pytest.approx(0.0, abs=1e-15)
        assert K.halfspace_pair_kernel(0.0) == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("n", (3, 6, 17))
    def test_cubic_pair_colinear_is_sixth_moment(self, n):
        # Gaussian sixth moment 15 pushed through the polar constant equals
        # the spherical moment 15 / (n (n+2) (n+4)).
        assert K.cubic_pair_kernel(1.0, n) == pytest.approx(
            15.0 / (n * (n + 2) * (n + 4)), rel=1e-12
        )

    def test_cubic_pair_orthogonal_vanishes(self):
        assert K.cubic_pair_kernel(0.0, 6) == 0.0

    def test_cubic_pair_monte_carlo(self):
        n, t = 6, 0.5
        theta = sample_sphere(11, n, 1_000_000)
        xi = np.zeros(n)
        xi[0], xi[1] = t, math.sqrt(1 - t * t)
        samples = theta[:, 0] ** 3 * (theta @ xi) ** 3
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - K.cubic_pair_kernel(t, n)) <= 4 * se


class TestProfiles:
    def test_plus_profile_anchors(self):
        assert K.plus_pair_profile(0.0) == 1.0
        assert K.plus_pair_profile(1.0) == pytest.approx(math.pi, rel=1e-15)

    def test_quartic_remainder_ratio(self):
        # Next coefficient after t^4/24 is t^6/80 = 0.0125 t^6; the grid
        # starts at 0.05 so rounding of the profile stays below the ratio.
        grid = np.linspace(-0.5, 0.5, 4001)
        grid = grid[np.abs(grid) >= 0.05]
        remainder = np.abs(K.plus_pair_profile(grid) - K.plus_pair_profile_series(grid, 4))
        assert float(np.max(remainder / np.abs(grid) ** 6)) <= 0.02

    def test_halfspace_profile_anchors(self):
        assert K.halfspace_profile(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
        assert K.halfspace_profile(1.0) == pytest.approx(math.pi, rel=1e-15)
        assert K.halfspace_profile(-1.0) == pytest.approx(0.0, abs=1e-15)

    def test_cubic_coefficient_from_finite_differences(self):
        # Third derivative of pi - arccos at 0 equals 1, so the cubic series
        # coefficient is 1/6; the candidate 1/(12 pi) is far outside the
        # finite-difference error.
        h = 1e-2
        third = (
            K.halfspace_profile(2 * h)
            - 2 * K.halfspace_profile(h)
            + 2 * K.halfspace_profile(-h)
            - K.halfspace_profile(-2 * h)
        ) / (2 * h ** 3)
        coefficient = third / 6.0
        assert abs(coefficient - 1.0 / 6.0) <= 1e-3
        assert abs(coefficient - 1.0 / (12 * math.pi)) > 0.1

    def test_series_orders_rejected(self):
        with pytest.raises(ValueError):
            K.plus_pair_profile_series(0.1, 3)
        with pytest.raises(ValueError):
            K.halfspace_profile_series(0.1, 2)

    def test_halfspace_series_order_one(self):
        assert K.halfspace_profile_series(0.2, 1) == pytest.approx(math.pi / 2 + 0.2)


class TestInverseSquareSeries:
    def test_n1_value(self):
        assert K.polar_constant1_inv_sq_series(1) == pytest.approx(1.625, rel=1e-15)

    def test_n2_gap(self):
        exact = K.polar_constant(2, 1) ** -2
        assert exact == pytest.approx(2 / math.pi, rel=1e-13)
        assert abs(exact - K.polar_constant1_inv_sq_series(2)) < 1.0 / (2 * 2 ** 4)

    @pytest.mark.parametrize("n", (8, 16, 32, 128, 512, 1024, 4096))
    def test_scaled_error_bounded(self, n):
        exact = K.polar_constant(n, 1) ** -2
        err = abs(exact - K.polar_constant1_inv_sq_series(n)) * n ** 4
        assert err <= 0.4


class TestRotationDensityConstant:
    def test_n3_value(self):
        expected = 0.5 * (math.gamma(1.0) / math.gamma(1.5)) ** 2
        assert K.rotation_density_constant(3) == pytest.approx(expected, rel=1e-13)
        assert K.rotation_density_constant(3) == pytest.approx(2 / math.pi, rel=1e-13)

    def test_n4_value(self):
        expected = (math.gamma(1.5) / math.gamma(2.0)) ** 2
        assert K.rotation_density_constant(4) == pytest.approx(expected, rel=1e-13)
        assert K.rotation_density_constant(4) == pytest.approx(math.pi / 4, rel=1e-13)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            K.rotation_density_constant(2)


class TestCorrelationValidation:
    def test_clamps_within_slack(self):
        assert K.clamp_correlation(1.0 + 1e-10) == 1.0
        assert K.clamp_correlation(-1.0 - 1e-10) == -1.0

    def test_rejects_beyond_slack(self):
        with pytest.raises(ValueError):
            K.clamp_correlation(1.0 + 1e-8)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            K.clamp_correlation(float("nan"))


class TestKernelProperties:
    @given(st.floats(-1.0, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_antipodal_halfspace_sum(self, t):
        total = K.halfspace_pair_kernel(t) + K.halfspace_pair_kernel(-t)
        assert total == pytest.approx(0.5, abs=1e-12)

    @given(st.floats(-1.0, 1.0), st.integers(1, 200))
    @settings(max_examples=100, deadline=None)
    def test_profile_kernel_factorization(self, t, n):
        assert 2 * math.pi * n * K.plus_pair_kernel(t, n) == pytest.approx(
            K.plus_pair_profile(t), rel=1e-12, abs=1e-15
        )

    @given(st.integers(1, 64))
    @settings(max_examples=30, deadline=None)
    def test_plus_pair_nonnegative_and_monotone(self, n):
        grid = np.linspace(-1.0, 1.0, 257)
        vals = K.plus_pair_kernel(grid, n)
        assert np.all(vals >= 0.0)
        assert np.all(np.diff(vals) >= -1e-15)

    def test_determinism(self):
        t = np.linspace(-1, 1, 11)
        a = K.plus_pair_kernel(t, 9)
        b = K.plus_pair_kernel(t.copy(), 9)
        assert np.array_equal(a, b)


@pytest.mark.slow
def test_all_kernels_match_monte_carlo_across_dimensions():
    """Every kernel within 5 SE of a 1e5-sample sphere average, n = 2..128."""
    from concurrent.futures import ThreadPoolExecutor

    samples = 100_000
    pairs = 200

    def worst_z(n):
        g = np.random.Generator(np.random.Philox(key=[2024, n]))
        units = g.standard_normal((2 * pairs, n))
        units /= np.linalg.norm(units, axis=1)[:, None]
        eta, xi = units[0::2], units[1::2]
        t = np.einsum("ij,ij->i", eta, xi)
        theta = sample_sphere(500 + n, n, samples)
        u = theta @ eta.T
        v = theta @ xi.T
        out = []
        for name, mat, exact in (
            ("plus", np.maximum(u, 0) * np.maximum(v, 0), K.plus_pair_kernel(t, n)),
            ("half", ((u >= 0) & (v >= 0)).astype(float), K.halfspace_pair_kernel(t)),
            ("cubic", (u * u * u) * (v * v * v), K.cubic_pair_kernel(t, n)),
        ):
            est = mat.mean(axis=0)
            se = mat.std(axis=0, ddof=1) / math.sqrt(samples)
            out.append((name, n, float(np.max(np.abs(est - exact) / se))))
        return out

    with ThreadPoolExecutor(max_workers=2) as pool:
        for rows in pool.map(worst_z, range(2, 129)):
            for name, n, z in rows:
                assert z <= 5.0, f"{name} kernel off by {z:.2f} SE at n={n}"


class TestSphericalConstantsCache:
    def test_matches_functions(self):
        sc = K.SphericalConstants(12)
        assert sc.polar_constant(1) == K.polar_constant(12, 1)
        assert sc.polar_constant(1) is not None and 1 in sc._polar_cache
        assert sc.plus_mean == K.plus_mean(12)
        assert sc.plus_pair_kernel(0.25) == K.plus_pair_kernel(0.25, 12)
        assert sc.rotation_density_constant == K.rotation_density_constant(12)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            K.SphericalConstants(0)
