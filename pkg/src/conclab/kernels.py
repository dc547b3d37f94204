"""Closed-form spherical pair kernels and their series expansions.

Everything here is a pure function of a dimension ``n`` and a correlation
``t = (x . y) / (|x| |y|)``.  The kernels give exact values of spherical
averages such as

    mean over the unit sphere of (theta . eta)_+ (theta . xi)_+

for unit vectors ``eta, xi`` with ``eta . xi = t``, so callers can evaluate
sphere integrals of pairwise quantities without any sampling.
"""

import math

import numpy as np
from scipy.special import gammaln

# Correlations may drift past 1 by rounding; anything worse is a data error.
CORRELATION_SLACK = 1e-9

# Cubic coefficient of the half-space profile pi/2 + t + t^3/6 + ...
# (arcsine series; cross-checked by finite differences in the test suite).
HALFSPACE_PROFILE_CUBIC = 1.0 / 6.0


def clamp_correlation(t):
    """Validate and clamp correlations to [-1, 1].

    Values with |t| <= 1 + 1e-9 are clamped; anything beyond is rejected
    rather than silently clamped, since a grossly out-of-range correlation
    means the caller's norms or inner products are wrong.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)):
        raise ValueError("correlation contains non-finite values")
    if np.any(np.abs(t) > 1.0 + CORRELATION_SLACK):
        bad = float(np.max(np.abs(t)))
        raise ValueError(f"correlation magnitude {bad} exceeds 1 + {CORRELATION_SLACK}")
    return np.clip(t, -1.0, 1.0)


def polar_constant(n, p):
    """Ratio between Gaussian and spherical moments of p-homogeneous functions.

    Integrating a p-homogeneous function against the standard Gaussian equals
    ``polar_constant(n, p)`` times its spherical average.  Equals
    ``n * 2**(p/2-1) * Gamma((n+p)/2) / Gamma((n+2)/2)``, evaluated through
    log-Gamma differences so it survives n in the thousands.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if p < 0:
        raise ValueError("homogeneity order must be >= 0")
    if p == 0:
        return 1.0
    if p == 2:
        return float(n)
    lg = gammaln((n + p) / 2.0) - gammaln((n + 2) / 2.0)
    return float(n * math.exp((p / 2.0 - 1.0) * math.log(2.0) + lg))


def plus_mean(n):
    """Spherical average of (theta . eta)_+ for a unit vector eta.

    Equals ``1 / (sqrt(2 pi) * polar_constant(n, 1))``.
    """
    return 1.0 / (math.sqrt(2.0 * math.pi) * polar_constant(n, 1))


def plus_pair_profile(t):
    """Angular profile (pi - arccos t) * t + sqrt(1 - t^2).

    This is ``2 pi n`` times :func:`plus_pair_kernel`; it only depends on the
    angle between the two directions, not on the dimension.
    """
    t = clamp_correlation(t)
    return (math.pi - np.arccos(t)) * t + np.sqrt(np.maximum(0.0, 1.0 - t * t))


def plus_pair_profile_series(t, order=4):
    """Taylor truncation of :func:`plus_pair_profile` around t = 0.

    Supported orders: 2 gives ``1 + pi t/2 + t^2/2``; 4 adds ``t^4/24``.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    t = clamp_correlation(t)
    out = 1.0 + (math.pi / 2.0) * t + 0.5 * t * t
    if order == 4:
        out = out + t ** 4 / 24.0
    return out


def plus_pair_kernel(t, n):
    """Spherical average of (theta . eta)_+ (theta . xi)_+ at correlation t.

    Closed form ``((pi - arccos t) t + sqrt(1 - t^2)) / (2 pi n)``.  The
    endpoints use the exact limits 1/(2n) at t = 1 and 0 at t = -1 (the
    arccos derivative blows up there, so the formula is not evaluated).
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    t = clamp_correlation(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = plus_pair_profile(t) / (2.0 * math.pi * n)
    out[t >= 1.0] = 1.0 / (2.0 * n)
    out[t <= -1.0] = 0.0
    return float(out[0]) if scalar else out


def halfspace_pair_kernel(t):
    """Fraction of the sphere lying in both of two half-spaces.

    For unit normals at correlation t the intersection of the half-spaces
    {theta . eta >= 0} and {theta . xi >= 0} has spherical measure
    ``(pi - arccos t) / (2 pi)``.
    """
    t = clamp_correlation(t)
    return (math.pi - np.arccos(t)) / (2.0 * math.pi)


def cubic_pair_kernel(t, n):
    """Spherical average of (theta . eta)^3 (theta . xi)^3 at correlation t.

    Reducing to a two-dimensional Gaussian integral gives
    ``(9 t + 6 t^3) / polar_constant(n, 6)``.
    """
    t = clamp_correlation(t)
    return (9.0 * t + 6.0 * (t * t * t)) / polar_constant(n, 6)


def halfspace_profile(t):
    """Angle profile pi - arccos(t); equals ``2 pi`` times the pair measure."""
    t = clamp_correlation(t)
    return math.pi - np.arccos(t)


def halfspace_profile_series(t, order=3):
    """Taylor truncation of :func:`halfspace_profile` around t = 0.

    Supported orders: 1 gives ``pi/2 + t``; 3 adds the arcsine-series cubic
    term ``t^3/6``.
    """
    if order not in (1, 3):
        raise ValueError("order must be 1 or 3")
    t = clamp_correlation(t)
    out = math.pi / 2.0 + t
    if order == 3:
        out = out + HALFSPACE_PROFILE_CUBIC * t ** 3
    return out


def polar_constant1_inv_sq_series(n):
    """Large-n series 1/n + 1/(2 n^2) + 1/(8 n^3) for polar_constant(n,1)**-2."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    n = float(n)
    return 1.0 / n + 1.0 / (2.0 * n * n) + 1.0 / (8.0 * n ** 3)


def rotation_density_constant(n):
    """Normalizer of the joint-rotation pair density on the sphere.

    Two independent points sampled on the embedded equator S^{n-2} and
    rotated by a common Haar rotation have joint law with density
    ``rotation_density_constant(n) / sqrt(1 - (theta1 . theta2)^2)`` with
    respect to the product of uniform measures.  Equals
    ``(n-2)/2 * (Gamma((n-1)/2) / Gamma(n/2))**2``; undefined for n < 3.
    """
    if n < 3:
        raise ValueError("pair density undefined for n < 3")
    lg = gammaln((n - 1) / 2.0) - gammaln(n / 2.0)
    return float((n - 2) / 2.0 * math.exp(2.0 * lg))


class SphericalConstants:
    """Per-dimension cache of the closed-form spherical constants.

    Bundles the constants every pair-sum needs for one fixed dimension so hot
    loops avoid recomputing Gamma ratios.
    """

    def __init__(self, n):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = int(n)
        self.plus_mean = plus_mean(n)
        self._polar_cache = {}

    def polar_constant(self, p):
        if p not in self._polar_cache:
            self._polar_cache[p] = polar_constant(self.n, p)
        return self._polar_cache[p]

    def plus_pair_kernel(self, t):
        return plus_pair_kernel(t, self.n)

    def halfspace_pair_kernel(self, t):
        return halfspace_pair_kernel(t)

    def cubic_pair_kernel(self, t):
        return cubic_pair_kernel(t, self.n)

    @property
    def rotation_density_constant(self):
        return rotation_density_constant(self.n)
