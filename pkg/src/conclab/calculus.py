"""Finite-difference spherical calculus on smooth 1-homogeneous functions.

The spherical gradient and Hessian of a function on the sphere are obtained
from the Euclidean derivatives of its 1-homogeneous extension by projection:

    grad_S f = P grad f,      f''_S = P (f'' - (grad f . theta) Id) P,

with P the projection onto the tangent space.  These operators are used to
verify, numerically, integral identities that relate sphere averages of the
Hessian to variance and gradient averages, and the reweighting density of
jointly rotated equator pairs.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import betaln

from . import rng
from .kernels import rotation_density_constant

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class CheckResult:
    """One numeric verification: estimate vs target with an error budget."""

    name: str
    estimate: float
    target: float
    std_err: float
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "name": self.name,
            "estimate": self.estimate,
            "target": self.target,
            "std_err": self.std_err,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }
        out.update(self.extra)
        return out


class HomogeneousTestFunction:
    """Closed-form 1-homogeneous C^2 function on R^n minus the origin.

    ``value`` maps an (m, n) batch to (m,) values; ``grad``/``hessian`` are
    optional closed forms used as oracles for the finite-difference path.
    """

    def __init__(self, label, value, grad=None, hessian=None, even=False):
        self.label = label
        self._value = value
        self._grad = grad
        self._hessian = hessian
        self.even = even

    def value(self, points):
        return self._value(np.atleast_2d(np.asarray(points, dtype=float)))

    def grad(self, points):
        if self._grad is None:
            raise NotImplementedError(f"{self.label} has no closed-form gradient")
        return self._grad(np.atleast_2d(np.asarray(points, dtype=float)))

    def hessian(self, points):
        if self._hessian is None:
            raise NotImplementedError(f"{self.label} has no closed-form Hessian")
        return self._hessian(np.atleast_2d(np.asarray(points, dtype=float)))

    @property
    def has_hessian(self):
        return self._hessian is not None

    def homogeneity_defect(self, points, scales):
        """max |f(t x) - t f(x)| over the given points and positive scales."""
        points = np.atleast_2d(points)
        base = self.value(points)
        worst = 0.0
        for t in np.atleast_1d(scales):
            worst = max(worst, float(np.max(np.abs(self.value(t * points) - t * base))))
        return worst


def linear_form(a):
    """f(x) = x . a."""
    a = np.asarray(a, dtype=float)

    def val(x):
        return x @ a

    def grd(x):
        return np.broadcast_to(a, x.shape).copy()

    def hes(x):
        m, n = x.shape
        return np.zeros((m, n, n))

    return HomogeneousTestFunction("linear", val, grd, hes)


def radial_norm():
    """f(x) = |x| (constant 1 on the sphere)."""

    def val(x):
        return np.linalg.norm(x, axis=1)

    def grd(x):
        r = np.linalg.norm(x, axis=1)
        return x / r[:, None]

    def hes(x):
        m, n = x.shape
        r = np.linalg.norm(x, axis=1)
        unit = x / r[:, None]
        eye = np.broadcast_to(np.eye(n), (m, n, n))
        return (eye - unit[:, :, None] * unit[:, None, :]) / r[:, None, None]

    return HomogeneousTestFunction("radial-norm", val, grd, hes, even=False)


def bilinear_form(a, b):
    """f(x) = (x . a)(x . b) / |x|."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def val(x):
        r = np.linalg.norm(x, axis=1)
        return (x @ a) * (x @ b) / r

    def grd(x):
        r = np.linalg.norm(x, axis=1)
        xa = x @ a
        xb = x @ b
        return (
            a[None, :] * (xb / r)[:, None]
            + b[None, :] * (xa / r)[:, None]
            - x * (xa * xb / r ** 3)[:, None]
        )

    def hes(x):
        m, n = x.shape
        r = np.linalg.norm(x, axis=1)
        unit = x / r[:, None]
        ua = unit @ a
        ub = unit @ b
        eye = np.broadcast_to(np.eye(n), (m, n, n))
        sym_ab = a[:, None] * b[None, :] + b[:, None] * a[None, :]
        out = np.broadcast_to(sym_ab, (m, n, n)).copy()
        out -= ub[:, None, None] * (
            a[None, :, None] * unit[:, None, :] + unit[:, :, None] * a[None, None, :]
        )
        out -= ua[:, None, None] * (
            b[None, :, None] * unit[:, None, :] + unit[:, :, None] * b[None, None, :]
        )
        out -= (ua * ub)[:, None, None] * eye
        out += 3.0 * (ua * ub)[:, None, None] * unit[:, :, None] * unit[:, None, :]
        return out / r[:, None, None]

    return HomogeneousTestFunction("bilinear", val, grd, hes, even=True)


def quadratic_mixture(coeffs, directions):
    """f(x) = sum_k c_k (x . a_k)^2 / |x| (even, 1-homogeneous)."""
    coeffs = np.asarray(coeffs, dtype=float)
    directions = np.asarray(directions, dtype=float)

    def val(x):
        r = np.linalg.norm(x, axis=1)
        return ((x @ directions.T) ** 2 @ coeffs) / r

    def grd(x):
        r = np.linalg.norm(x, axis=1)
        proj = x @ directions.T
        lead = 2.0 * (proj * coeffs[None, :]) @ directions / r[:, None]
        return lead - x * ((proj ** 2 @ coeffs) / r ** 3)[:, None]

    def hes(x):
        m, n = x.shape
        r = np.linalg.norm(x, axis=1)
        unit = x / r[:, None]
        proj = unit @ directions.T
        eye = np.broadcast_to(np.eye(n), (m, n, n))
        out = np.zeros((m, n, n))
        out += 2.0 * np.einsum("k,ki,kj->ij", coeffs, directions, directions)[None, :, :]
        cross = np.einsum("mk,k,ki->mi", proj, coeffs, directions)
        out -= 2.0 * (
            cross[:, :, None] * unit[:, None, :] + unit[:, :, None] * cross[:, None, :]
        )
        quad_val = proj ** 2 @ coeffs
        out -= quad_val[:, None, None] * eye
        out += 3.0 * quad_val[:, None, None] * unit[:, :, None] * unit[:, None, :]
        return out / r[:, None, None]

    return HomogeneousTestFunction("quadratic-mixture", val, grd, hes, even=True)


# ---------------------------------------------------------------------------
# Finite differences


def _validate_step(h):
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("finite-difference step must lie in [1e-6, 1e-2]")


def fd_gradient(func, points, h=DEFAULT_FD_STEP):
    """Central-difference Euclidean gradient, batched over points."""
    _validate_step(h)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = points.shape
    out = np.empty((m, n))
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = h
        out[:, i] = (func(points + shift) - func(points - shift)) / (2.0 * h)
    return out


def fd_hessian(func, points, h=DEFAULT_FD_STEP):
    """Central-difference Euclidean Hessian, symmetrized, batched over points."""
    _validate_step(h)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = points.shape
    out = np.empty((m, n, n))
    center = func(points)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[:, i, i] = (func(points + ei) - 2.0 * center + func(points - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            mixed = (
                func(points + ei + ej)
                - func(points + ei - ej)
                - func(points - ei + ej)
                + func(points - ei - ej)
            ) / (4.0 * h * h)
            out[:, i, j] = mixed
            out[:, j, i] = mixed
    return out


def _tangential(vectors, thetas):
    return vectors - np.einsum("mi,mi->m", vectors, thetas)[:, None] * thetas


def _spherical_hessian_from_parts(hessians, grads, values, thetas):
    """P (H - (grad . theta) Id) P for unit thetas, batched.

    For 1-homogeneous functions grad . theta = f, so ``values`` supplies the
    radial multiplier directly.
    """
    del grads
    m, n = thetas.shape
    eye = np.eye(n)
    adjusted = hessians - values[:, None, None] * eye[None, :, :]
    ht = np.einsum("mij,mj->mi", adjusted, thetas)
    th = np.einsum("mi,mij->mj", thetas, adjusted)
    tht = np.einsum("mi,mi->m", thetas, ht)
    out = (
        adjusted
        - thetas[:, :, None] * th[:, None, :]
        - ht[:, :, None] * thetas[:, None, :]
        + tht[:, None, None] * thetas[:, :, None] * thetas[:, None, :]
    )
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def spherical_grad_fd(func, theta, h=DEFAULT_FD_STEP):
    """Tangential finite-difference gradient at a unit vector."""
    theta = np.asarray(theta, dtype=float)
    caller = func.value if isinstance(func, HomogeneousTestFunction) else func
    grad = fd_gradient(caller, theta[None, :], h=h)
    return _tangential(grad, theta[None, :])[0]


def spherical_hessian_fd(func, theta, h=DEFAULT_FD_STEP):
    """Projected, symmetrized finite-difference Hessian at a unit vector."""
    theta = np.asarray(theta, dtype=float)
    caller = func.value if isinstance(func, HomogeneousTestFunction) else func
    points = theta[None, :]
    hess = fd_hessian(caller, points, h=h)
    grads = fd_gradient(caller, points, h=h)
    values = np.einsum("mi,mi->m", grads, points)
    return _spherical_hessian_from_parts(hess, grads, values, points)[0]


# ---------------------------------------------------------------------------
# Integral identity checks


def check_second_order_identity(func, n, num_samples, seed, h=DEFAULT_FD_STEP):
    """Sphere-average identity linking the projected and plain Hessians.

    Using shared sample points, estimates both

        lhs = E ||f''_S||_HS^2
        rhs = E ||f''||_HS^2 - (n-1)(E f)^2 - (n-1)Var(f) + 2 E |grad_S f|^2

    and returns the difference with its standard error; passing means
    |difference| <= 4 standard errors.
    """
    diffs = np.empty(num_samples)
    lhs_vals = np.empty(num_samples)
    for start, thetas in rng.sphere_blocks(seed, n, num_samples, stream=rng.STREAM_CALCULUS):
        values = func.value(thetas)
        grads = fd_gradient(func.value, thetas, h=h)
        hessians = fd_hessian(func.value, thetas, h=h)
        hess_s = _spherical_hessian_from_parts(hessians, grads, values, thetas)
        tang = _tangential(grads, thetas)
        lhs = np.einsum("mij,mij->m", hess_s, hess_s)
        plain = np.einsum("mij,mij->m", hessians, hessians)
        gs = np.einsum("mi,mi->m", tang, tang)
        # Per-sample form of the right side: the (E f)^2 + Var(f) split
        # recombines into E f^2, estimated sample-wise.
        rhs = plain - (n - 1.0) * values ** 2 + 2.0 * gs
        stop = start + thetas.shape[0]
        diffs[start:stop] = lhs - rhs
        lhs_vals[start:stop] = lhs
    difference = float(np.mean(diffs))
    std_err = float(np.std(diffs, ddof=1) / math.sqrt(num_samples))
    lhs_mean = float(np.mean(lhs_vals))
    return CheckResult(
        name="second-order-identity",
        estimate=difference,
        target=0.0,
        std_err=std_err,
        tolerance=4.0 * std_err,
        passed=abs(difference) <= 4.0 * std_err,
        extra={"lhs": lhs_mean, "rhs": lhs_mean - difference, "function": func.label},
    )


def check_rotation_pair_density(n, num_samples, seed, density_constant=None):
    """Verify the jointly-rotated equator pair density by reweighting.

    Independent uniform pairs (theta1, theta2) reweighted by
    ``c_n / sqrt(1 - (theta1 . theta2)^2)`` should (a) have total weight 1
    and (b) reproduce E[t^2] = 1/(n-1), the inner-product second moment of
    independent points on the one-dimension-lower sphere.
    """
    if n < 4:
        raise ValueError(
            "pair-density reweighting needs n >= 4; the weight has "
            "non-integrable variance at n = 3"
        )
    constant = rotation_density_constant(n) if density_constant is None else density_constant
    weights = np.empty(num_samples)
    weighted_t2 = np.empty(num_samples)
    for index, start, length in rng.blocks(num_samples):
        g = rng.block_generator(seed, rng.STREAM_UNIT_PAIRS, index)
        z1 = g.standard_normal((length, n))
        z2 = g.standard_normal((length, n))
        z1 /= np.linalg.norm(z1, axis=1)[:, None]
        z2 /= np.linalg.norm(z2, axis=1)[:, None]
        t = np.einsum("mi,mi->m", z1, z2)
        w = constant / np.sqrt(np.maximum(1.0 - t * t, 1e-300))
        weights[start : start + length] = w
        weighted_t2[start : start + length] = t * t * w
    norm_est = float(np.mean(weights))
    norm_se = float(np.std(weights, ddof=1) / math.sqrt(num_samples))
    mom_est = float(np.mean(weighted_t2))
    mom_se = float(np.std(weighted_t2, ddof=1) / math.sqrt(num_samples))
    mom_target = 1.0 / (n - 1.0)
    passed = abs(norm_est - 1.0) <= 0.01 and abs(mom_est - mom_target) <= 4.0 * mom_se
    return CheckResult(
        name="rotation-pair-density",
        estimate=norm_est,
        target=1.0,
        std_err=norm_se,
        tolerance=0.01,
        passed=passed,
        extra={
            "moment_estimate": mom_est,
            "moment_target": mom_target,
            "moment_std_err": mom_se,
        },
    )


def rotation_density_quadrature_error(n):
    """1-d quadrature check that the pair-density weight integrates to 1."""
    if n < 4:
        raise ValueError("needs n >= 4")
    constant = rotation_density_constant(n)
    log_norm = -(betaln(0.5, (n - 1) / 2.0))

    def integrand(t):
        return constant * math.exp(log_norm + (n - 4.0) / 2.0 * math.log1p(-t * t))

    total, _ = quad(integrand, -1.0, 1.0, limit=200)
    return abs(total - 1.0)


def second_order_poincare_check(func, n, num_samples, seed, h=DEFAULT_FD_STEP):
    """Ratio of Var(f) to E||f''_S||^2 / (2n(n+2)) for an even smooth f.

    The ratio should not exceed 1 beyond the combined Monte Carlo and
    finite-difference error allowance.
    """
    if not func.even:
        raise ValueError("the second-order variance bound applies to even functions")
    values = np.empty(num_samples)
    hs_sq = np.empty(num_samples)
    hs_sq_coarse = np.empty(num_samples)
    for start, thetas in rng.sphere_blocks(seed, n, num_samples, stream=rng.STREAM_CALCULUS):
        vals = func.value(thetas)
        for target, step in ((hs_sq, h), (hs_sq_coarse, 2.0 * h)):
            grads = fd_gradient(func.value, thetas, h=step)
            hessians = fd_hessian(func.value, thetas, h=step)
            hess_s = _spherical_hessian_from_parts(hessians, grads, vals, thetas)
            target[start : start + thetas.shape[0]] = np.einsum(
                "mij,mij->m", hess_s, hess_s
            )
        values[start : start + thetas.shape[0]] = vals
    m = num_samples
    variance = float(np.var(values))
    var_se = float(
        math.sqrt(max(np.mean((values - values.mean()) ** 4) - variance ** 2, 0.0) / m)
    )
    denom = float(np.mean(hs_sq)) / (2.0 * n * (n + 2.0))
    denom_se = float(np.std(hs_sq, ddof=1) / math.sqrt(m)) / (2.0 * n * (n + 2.0))
    fd_allowance = abs(float(np.mean(hs_sq_coarse)) - float(np.mean(hs_sq))) / (
        2.0 * n * (n + 2.0)
    )
    if denom == 0.0:
        ratio = 0.0 if variance == 0.0 else math.inf
        ratio_err = 0.0
    else:
        ratio = variance / denom
        ratio_err = var_se / denom + variance * (denom_se + fd_allowance) / denom ** 2
    tolerance = 1.0 + 4.0 * ratio_err
    return CheckResult(
        name="second-order-variance-bound",
        estimate=ratio,
        target=1.0,
        std_err=ratio_err,
        tolerance=tolerance,
        passed=ratio <= tolerance,
        extra={"variance": variance, "hessian_bound": denom, "function": func.label},
    )
