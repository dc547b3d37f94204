"""The half-space functional of a measure and its spherical statistics.

For a weighted atom set the functional is

    F(theta) = sum_i w_i (x_i . theta)_+,

the theta-component of the center of mass sitting in the half-space
{x . theta > 0}.  Its spherical mean, variance, and gradient second moments
are computed two independent ways: exactly, through the closed-form pair
kernels, and by Monte Carlo over uniform sphere points.  The exact path has
an O(n) fast path for the full sign-vector cube via the Hamming profile.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import rng
from .kernels import (
    cubic_pair_kernel,
    halfspace_pair_kernel,
    plus_mean,
    plus_pair_kernel,
)
from .measure import DEFAULT_PAIR_CAP, _check_cap
from .reduction import ordered_chunk_sum

VAR_CLIP = 1e-12

# Correlations within a few ulps of +-1 are colinear pairs whose t suffered
# norm-product rounding; snapping avoids the unbounded arccos derivative at
# the endpoints amplifying that rounding into ~1e-8 kernel noise.
_ENDPOINT_SNAP = 1e-14


def _pair_products(norms_sq_left, norms_sq_right):
    """|x_i| |x_j| as sqrt of the product of squared norms.

    Squared norms of integer-coordinate atoms are exact, so the pair product
    (for example n for two sign vectors) comes out exact instead of carrying
    the 1-ulp noise of multiplying two rounded square roots.
    """
    return np.sqrt(np.outer(norms_sq_left, norms_sq_right))


def _correlations(gram, products):
    t = gram / products
    np.clip(t, -1.0, 1.0, out=t)
    t[t > 1.0 - _ENDPOINT_SNAP] = 1.0
    t[t < -1.0 + _ENDPOINT_SNAP] = -1.0
    return t


class NegativeVariance(ArithmeticError):
    """Exact-kernel cancellation produced a variance below -1e-12."""


@dataclass(frozen=True)
class FStats:
    """Spherical statistics of the half-space functional.

    ``var_F = second_moment_F - mean_F**2`` and ``grad_s_sq = grad_sq -
    second_moment_F`` by construction; tiny negative values from cancellation
    are clipped to zero and flagged.  ``mc_std_err`` carries per-field
    standard errors for the Monte Carlo method and is None for exact methods.
    """

    mean_F: float
    second_moment_F: float
    var_F: float
    grad_sq: float
    grad_s_sq: float
    method: str
    sample_count: int = 0
    mc_std_err: dict | None = None
    var_clipped: bool = False

    def to_dict(self):
        return {
            "mean_F": self.mean_F,
            "second_moment_F": self.second_moment_F,
            "var_F": self.var_F,
            "grad_sq": self.grad_sq,
            "grad_s_sq": self.grad_s_sq,
            "method": self.method,
            "sample_count": self.sample_count,
            "mc_std_err": self.mc_std_err,
            "var_clipped": self.var_clipped,
        }


def _finish_stats(mean, second, grad_sq, method, sample_count=0, mc_std_err=None, var=None):
    # var defaults to the defining difference; exact paths pass the centered
    # kernel sum instead, which carries no catastrophic cancellation.
    if var is None:
        var = second - mean * mean
    grad_s = grad_sq - second
    clipped = False
    if var < 0.0:
        if var < -VAR_CLIP:
            raise NegativeVariance(f"variance {var} below -{VAR_CLIP}")
        var, clipped = 0.0, True
    if grad_s < 0.0:
        if grad_s < -VAR_CLIP:
            raise NegativeVariance(f"spherical gradient moment {grad_s} below -{VAR_CLIP}")
        grad_s, clipped = 0.0, True
    return FStats(
        mean_F=float(mean),
        second_moment_F=float(second),
        var_F=float(var),
        grad_sq=float(grad_sq),
        grad_s_sq=float(grad_s),
        method=method,
        sample_count=sample_count,
        mc_std_err=mc_std_err,
        var_clipped=clipped,
    )


# ---------------------------------------------------------------------------
# Pointwise evaluation


def _check_unit(theta, n):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n,):
        raise ValueError(f"direction has shape {theta.shape}, expected ({n},)")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector (within 1e-9)")
    return theta


def value(measure, theta):
    """F(theta) = sum_i w_i (x_i . theta)_+."""
    theta = _check_unit(theta, measure.n)
    return float(measure.weights @ np.maximum(measure.atoms @ theta, 0.0))


def gradient(measure, theta):
    """Euclidean gradient: the weighted atom sum over the open half-space.

    Atoms exactly on the boundary x . theta = 0 are excluded (measure-zero
    event for uniform theta).
    """
    theta = _check_unit(theta, measure.n)
    mask = measure.atoms @ theta > 0.0
    return (measure.weights[mask]) @ measure.atoms[mask]


def spherical_gradient(measure, theta):
    """Tangential part of the gradient at theta."""
    theta = _check_unit(theta, measure.n)
    grad = gradient(measure, theta)
    return grad - (grad @ theta) * theta


# ---------------------------------------------------------------------------
# Exact kernel statistics


def stats_exact(measure, threads=1, cap=DEFAULT_PAIR_CAP):
    """Exact spherical statistics via the closed-form pair kernels.

    O(N^2) in the atom count; the double sum is chunked and reduced in fixed
    order so results do not depend on the thread count.
    """
    _check_cap(measure, cap)
    n = measure.n
    atoms = measure.atoms
    norms_sq = np.einsum("ij,ij->i", atoms, atoms)
    weights = measure.weights
    pm = plus_mean(n)
    pm_sq = pm * pm

    mean = pm * float(weights @ measure.norms)

    def worker(start, stop):
        gram = atoms[start:stop] @ atoms.T
        products = _pair_products(norms_sq[start:stop], norms_sq)
        t = _correlations(gram, products)
        kernel = plus_pair_kernel(t, n)
        kernel *= products
        second = weights[start:stop] @ kernel @ weights
        kernel -= pm_sq * products
        var = weights[start:stop] @ kernel @ weights
        half = halfspace_pair_kernel(t)
        half *= gram
        grad = weights[start:stop] @ half @ weights
        return np.array([second, var, grad])

    second, var, grad_sq = ordered_chunk_sum(
        worker, measure.size, measure.size, threads=threads
    )
    return _finish_stats(mean, second, grad_sq, "exact-kernel", var=var)


def cube_stats_exact(n):
    """Exact spherical statistics for the full sign-vector cube, O(n).

    Pair correlations of sign vectors depend only on the Hamming distance k,
    with pair probability 2^-n binom(n, k); the 2^n-atom double sum collapses
    to n+1 kernel evaluations.  Binomial weights are computed in log space.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    k = np.arange(n + 1)
    log_prob = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2.0)
    prob = np.exp(log_prob)
    t = (n - 2.0 * k) / n
    pm = plus_mean(n)
    mean = math.sqrt(n) * pm
    kernel = plus_pair_kernel(t, n)
    second = float(prob @ kernel) * n
    var = float(prob @ (kernel - pm * pm)) * n
    grad_sq = float(prob @ (halfspace_pair_kernel(t) * (n - 2.0 * k)))
    return _finish_stats(mean, second, grad_sq, "hamming-exact", var=var)


# ---------------------------------------------------------------------------
# Monte Carlo statistics


def sample_functional(measure, num_samples, seed, with_gradient=False):
    """Values F(theta_j) (and optionally |grad_S F|^2) at uniform sphere points.

    Samples are generated in fixed 4096-point blocks keyed by (seed, block),
    so the output is bit-identical for a given seed regardless of scheduling.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    f_vals = np.empty(num_samples)
    gs_vals = np.empty(num_samples) if with_gradient else None
    for start, theta in rng.sphere_blocks(seed, measure.n, num_samples):
        proj = theta @ measure.atoms.T
        plus = np.maximum(proj, 0.0)
        f_block = plus @ measure.weights
        f_vals[start : start + theta.shape[0]] = f_block
        if with_gradient:
            grad = ((proj > 0.0) * measure.weights) @ measure.atoms
            gs_vals[start : start + theta.shape[0]] = (
                np.einsum("ij,ij->i", grad, grad) - f_block * f_block
            )
    return (f_vals, gs_vals) if with_gradient else f_vals


def _jackknife_variance_se(values):
    """Delete-one jackknife standard error of the plug-in variance."""
    m = values.size
    if m < 2:
        return float("nan")
    centered = values - values.mean()
    sq = centered * centered
    mu2 = float(np.mean(sq))
    mu4 = float(np.mean(sq * sq))
    return math.sqrt(max(0.0, m * m * (mu4 - mu2 * mu2) / (m - 1) ** 3))


def stats_mc(measure, num_samples, seed, threads=1):
    """Monte Carlo spherical statistics with jackknife standard errors.

    ``threads`` is accepted for interface symmetry; sampling is block-keyed,
    so the result is identical for any value.
    """
    if num_samples < 2:
        raise ValueError("need at least two samples")
    f_vals, gs_vals = sample_functional(measure, num_samples, seed, with_gradient=True)
    m = num_samples
    mean = float(np.mean(f_vals))
    second = float(np.mean(f_vals ** 2))
    grad_sq = second + float(np.mean(gs_vals))
    se = {
        "mean_F": float(np.std(f_vals, ddof=1) / math.sqrt(m)),
        "second_moment_F": float(np.std(f_vals ** 2, ddof=1) / math.sqrt(m)),
        "var_F": _jackknife_variance_se(f_vals),
        "grad_sq": float(np.std(gs_vals + f_vals ** 2, ddof=1) / math.sqrt(m)),
        "grad_s_sq": float(np.std(gs_vals, ddof=1) / math.sqrt(m)),
    }
    return _finish_stats(mean, second, grad_sq, "monte-carlo", sample_count=m, mc_std_err=se)


# ---------------------------------------------------------------------------
# Third-moment functional


def third_moment_variance_exact(measure, threads=1, cap=DEFAULT_PAIR_CAP):
    """n^2 times the spherical second moment of theta -> E (X . theta)^3.

    Evaluated exactly through the cubic pair kernel:
    n^2 sum_ij w_i w_j |x_i|^3 |x_j|^3 K3(t_ij).
    """
    _check_cap(measure, cap)
    n = measure.n
    atoms = measure.atoms
    norms_sq = np.einsum("ij,ij->i", atoms, atoms)
    weights = measure.weights

    def worker(start, stop):
        gram = atoms[start:stop] @ atoms.T
        products = _pair_products(norms_sq[start:stop], norms_sq)
        t = _correlations(gram, products)
        kernel = cubic_pair_kernel(t, n)
        kernel *= products * products * products
        return float(weights[start:stop] @ kernel @ weights)

    total = ordered_chunk_sum(worker, measure.size, measure.size, threads=threads)
    return n ** 2 * total


def third_moment_variance_mc(measure, num_samples, seed):
    """Monte Carlo estimate of the same quantity, with its standard error."""
    n = measure.n
    total = np.empty(num_samples)
    for start, theta in rng.sphere_blocks(seed, n, num_samples):
        proj = theta @ measure.atoms.T
        cube = proj * proj * proj
        total[start : start + theta.shape[0]] = cube @ measure.weights
    sq = total * total
    estimate = n ** 2 * float(np.mean(sq))
    std_err = n ** 2 * float(np.std(sq, ddof=1) / math.sqrt(num_samples))
    return estimate, std_err


# ---------------------------------------------------------------------------
# Orlicz and moment norms


@dataclass(frozen=True)
class OrliczEstimate:
    """Empirical Orlicz norm: smallest t with mean exp((|f - mean|/t)^alpha) = 2."""

    alpha_index: int
    norm: float
    sample_count: int
    bisection_residual: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "alpha_index": self.alpha_index,
            "norm": self.norm,
            "sample_count": self.sample_count,
            "bisection_residual": self.bisection_residual,
            "degenerate": self.degenerate,
        }


def orlicz_norm(samples, alpha_index, center=True):
    """Bisection for the empirical Orlicz norm of a sample set.

    alpha_index 1 targets exponential tails, 2 Gaussian tails.  Samples are
    centered by their empirical mean unless ``center`` is False.  The mean of
    exp((|f - mean|/t)^alpha) is strictly decreasing in t, so the root in
    [max|f - mean|/40, max|f - mean|*40] is unique.
    """
    if alpha_index not in (1, 2):
        raise ValueError("alpha_index must be 1 or 2")
    samples = np.asarray(samples, dtype=float)
    if samples.size < 100:
        raise ValueError("need at least 100 samples")
    deviations = np.abs(samples - samples.mean()) if center else np.abs(samples)
    top = float(np.max(deviations))
    if top == 0.0:
        return OrliczEstimate(alpha_index, 0.0, samples.size, 0.0, degenerate=True)

    def excess(t):
        exponent = (deviations / t) ** alpha_index
        # exp overflows above ~709; the mean is certainly > 2 there.
        if np.max(exponent) > 500.0:
            return 1.0
        return float(np.mean(np.exp(exponent))) - 2.0

    lo, hi = top / 40.0, top * 40.0
    if excess(lo) < 0.0 or excess(hi) > 0.0:
        raise ArithmeticError("no sign change in the Orlicz bisection bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    root = 0.5 * (lo + hi)
    return OrliczEstimate(alpha_index, float(root), samples.size, abs(excess(root)))


def moment_norms(measure, p_list, num_samples, seed):
    """Monte Carlo central L^p norms of F over the sphere.

    Returns [(p, ||F - mean||_p), ...] computed on one shared sample set.
    """
    for p in p_list:
        if p < 1:
            raise ValueError("p must be >= 1")
    f_vals = sample_functional(measure, num_samples, seed)
    deviations = np.abs(f_vals - f_vals.mean())
    return [(float(p), float(np.mean(deviations ** p) ** (1.0 / p))) for p in p_list]


# ---------------------------------------------------------------------------
# Cube gradient probe


def cube_planar_gradient_profile(n, angles):
    """|grad_S F| for the full cube along theta = (cos a, sin a, 0, ...).

    Uses the two-coordinate structure of the cube: conditioned on the first
    two signs, the remaining coordinates integrate out of the half-space
    indicator only through the sign of cos(a) s1 + sin(a) s2, so the gradient
    restricted to the plane can be enumerated over 4 sign patterns.
    """
    if n < 2:
        raise ValueError("needs n >= 2")
    out = []
    first_two = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    for a in np.atleast_1d(np.asarray(angles, dtype=float)):
        theta2 = np.array([math.cos(a), math.sin(a)])
        grad = np.zeros(2)
        for signs in first_two:
            if signs @ theta2 > 0.0:
                grad += 0.25 * signs
        # Tail coordinates contribute zero mean on either side of the plane.
        full_grad = np.zeros(n)
        full_grad[:2] = grad
        theta = np.zeros(n)
        theta[:2] = theta2
        tangential = full_grad - (full_grad @ theta) * theta
        out.append(float(np.linalg.norm(tangential)))
    return np.array(out)
