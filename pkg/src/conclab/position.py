"""Radially weighted isotropic positioning over volume-preserving maps.

A measure is in L^p-isotropic position when its |x|^(p-2)-weighted
covariance is a scalar matrix.  The optimizer below finds the det-1 linear
image with that property by a damped fixed-point iteration on the weighted
covariance map; each step provably decreases the p-th moment objective
``sum_i w_i |S x_i|^p``, whose minimizers over det-1 maps are exactly the
scalar-covariance positions.

Residuals are measured scale-free, as the operator-norm distance between the
trace-normalized weighted covariance and the identity: volume-preserving
maps cannot adjust the overall radial scale, so scalarness (not the literal
scale identity) is the reachable normalization.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import rng
from .measure import (
    center_of_mass,
    lp_covariance,
    lp_scale,
    make_measure,
)

MAX_P = 4.0
EIGENVALUE_FLOOR = 1e-14
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
MIN_DAMPING = 1e-6


class DegenerateSupport(ValueError):
    """The atoms do not span R^n (weighted covariance is singular)."""


class NonConvergence(RuntimeError):
    """The positioning iteration hit max_iter above tolerance."""


@dataclass(frozen=True)
class PositionResult:
    """Outcome of one positioning run.

    ``transform`` has determinant 1 (within 1e-9) and applies to atoms
    translated by ``-center``.  ``objective_trace`` holds the p-th moment
    after every accepted step and is non-increasing.
    """

    transform: np.ndarray
    center: np.ndarray
    residual: float
    iterations: int
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    p: float = 0.0

    def apply(self, measure):
        """Push a measure through the fitted centering and linear map."""
        return make_measure(
            (measure.atoms - self.center) @ self.transform.T, measure.weights
        )

    def to_dict(self):
        return {
            "transform": [[float(v) for v in row] for row in self.transform],
            "center": [float(v) for v in self.center],
            "residual": self.residual,
            "iterations": self.iterations,
            "objective_trace": [float(v) for v in self.objective_trace],
            "converged": self.converged,
            "p": self.p,
        }


def _check_p(p):
    if not 0.0 < p < MAX_P:
        raise ValueError(
            f"p={p} outside (0, {MAX_P}); scalar-covariance positions are "
            "provably unique only on that range, so larger p is rejected"
        )


def scalar_residual(measure, p):
    """Operator-norm distance of the trace-normalized weighted covariance from Id."""
    matrix = lp_covariance(measure, p)
    trace = float(np.trace(matrix))
    if trace <= 0.0:
        raise DegenerateSupport("weighted covariance has nonpositive trace")
    eigs = np.linalg.eigvalsh(matrix * (measure.n / trace))
    return float(np.max(np.abs(eigs - 1.0)))


def is_lp_isotropic(measure, p, tol=1e-8):
    """Scalarness test of the weighted covariance; returns (flag, residual)."""
    _check_p(p)
    residual = scalar_residual(measure, p)
    return residual <= tol, residual


def _inverse_root(matrix, exponent):
    """matrix**(-exponent/2) through eigendecomposition with a floor check."""
    eigs, vecs = np.linalg.eigh(matrix)
    top = float(eigs[-1])
    if top <= 0.0 or eigs[0] < EIGENVALUE_FLOOR * top:
        raise DegenerateSupport(
            "weighted covariance is numerically singular: support lies in a hyperplane"
        )
    scaled = eigs ** (-0.5 * exponent)
    return (vecs * scaled) @ vecs.T


def _normalize_det(matrix):
    sign, logdet = np.linalg.slogdet(matrix)
    if sign <= 0.0:
        raise DegenerateSupport("transform lost positivity")
    return matrix * math.exp(-logdet / matrix.shape[0])


def _objective(atoms, weights, matrix, p):
    return float(weights @ np.linalg.norm(atoms @ matrix.T, axis=1) ** p)


def lp_isotropic_position(
    measure,
    p,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    damping=1.0,
):
    """Damped fixed-point search for the det-1 scalar-covariance position.

    Each iteration computes the trace-normalized weighted covariance M of the
    current image and applies the det-normalized step M**(-eta/2).  If the
    step increases the p-th moment objective the damping exponent eta is
    halved (backtracking); the step direction is a strict descent direction
    whenever M is not scalar, so progress stalls only at the optimum.
    """
    _check_p(p)
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    center = center_of_mass(measure)
    atoms = measure.atoms - center
    weights = measure.weights
    n = measure.n
    centered = make_measure(atoms, weights)

    transform = np.eye(n)
    current = centered
    trace = [_objective(atoms, weights, transform, p)]
    residual = scalar_residual(current, p)
    iterations = 0

    while residual > tol and iterations < max_iter:
        matrix = lp_covariance(current, p)
        matrix *= n / float(np.trace(matrix))
        eta = damping
        accepted = False
        while eta >= MIN_DAMPING:
            step = _normalize_det(_inverse_root(matrix, eta))
            candidate = _normalize_det(step @ transform)
            objective = _objective(atoms, weights, candidate, p)
            if objective <= trace[-1] * (1.0 + 1e-12):
                transform = candidate
                trace.append(objective)
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        current = centered.transformed(transform)
        residual = scalar_residual(current, p)
        iterations += 1

    if residual > tol:
        raise NonConvergence(
            f"residual {residual:.3e} above tol {tol:.1e} after {iterations} iterations"
        )
    return PositionResult(
        transform=transform,
        center=np.asarray(center, dtype=float),
        residual=residual,
        iterations=iterations,
        objective_trace=trace,
        converged=True,
        p=float(p),
    )


def isotropic_position(measure):
    """Closed-form det-1 whitening (p = 2): S proportional to Cov^(-1/2)."""
    center = center_of_mass(measure)
    centered = make_measure(measure.atoms - center, measure.weights)
    covariance = lp_covariance(centered, 2.0)
    transform = _normalize_det(_inverse_root(covariance, 1.0))
    result_measure = centered.transformed(transform)
    residual = scalar_residual(result_measure, 2.0)
    return PositionResult(
        transform=transform,
        center=np.asarray(center, dtype=float),
        residual=residual,
        iterations=1,
        objective_trace=[
            _objective(centered.atoms, centered.weights, np.eye(measure.n), 2.0),
            _objective(centered.atoms, centered.weights, transform, 2.0),
        ],
        converged=True,
        p=2.0,
    )


def uniqueness_check(measure, p, trials=5, seed=0, tol=1e-10, max_iter=DEFAULT_MAX_ITER):
    """Spread of singular values of the map linking two independent positions.

    For random invertible A1, A2, position both images and form
    Q = (S1 A1)(S2 A2)^-1, which carries one scalar-covariance image to
    another.  If positions are unique up to orthogonal maps (and a global
    scale, which det-1 normalization absorbs), the singular values of Q are
    all equal; returns the max over trials of max_k |s_k - mean| / mean.
    """
    _check_p(p)
    worst = 0.0
    g = rng.block_generator(seed, rng.STREAM_GL, 0)
    for _ in range(trials):
        maps = []
        for _ in range(2):
            while True:
                a = g.standard_normal((measure.n, measure.n))
                if abs(np.linalg.det(a)) > 1e-3:
                    break
            image = measure.transformed(a)
            result = lp_isotropic_position(image, p, tol=tol, max_iter=max_iter)
            maps.append(result.transform @ a)
        q = maps[0] @ np.linalg.inv(maps[1])
        singulars = np.linalg.svd(q, compute_uv=False)
        mean = float(np.mean(singulars))
        worst = max(worst, float(np.max(np.abs(singulars - mean)) / mean))
    return worst


@dataclass(frozen=True)
class ProximityReport:
    """Operator norms of the map from the p=1 position to unit covariance."""

    t_norm: float
    t_inv_norm: float
    sqrt_n_z1: float

    def to_dict(self):
        return {
            "t_norm": self.t_norm,
            "t_inv_norm": self.t_inv_norm,
            "sqrt_n_z1": self.sqrt_n_z1,
        }


def proximity_report(measure, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Compare the p=1 position with the unit-covariance whitening.

    Positions the (centered) measure at p=1, computes the exact whitening W
    with Cov(W image) = Id, and reports the operator norms of the map
    T = W S1^-1 carrying the p=1 image to the unit-covariance image, plus
    sqrt(n) times the |x|^-1 moment of the p=1 image.
    """
    result = lp_isotropic_position(measure, 1.0, tol=tol, max_iter=max_iter)
    positioned = result.apply(measure)
    centered = measure.recentered()
    whitening = _inverse_root(lp_covariance(centered, 2.0), 1.0)
    t_matrix = whitening @ np.linalg.inv(result.transform)
    singulars = np.linalg.svd(t_matrix, compute_uv=False)
    return ProximityReport(
        t_norm=float(singulars[0]),
        t_inv_norm=float(1.0 / singulars[-1]),
        sqrt_n_z1=math.sqrt(measure.n) * lp_scale(positioned, 1.0),
    )


def perturbation_gain(measure, result, p, trials=50, epsilon=1e-3, seed=0):
    """Best relative objective decrease over random det-1 perturbations.

    Perturbs the fitted transform by (Id + eps K) with det renormalization;
    at a true minimum no perturbation should win more than rounding noise.
    Returns max over trials of (obj - obj_perturbed) / obj.
    """
    atoms = measure.atoms - result.center
    weights = measure.weights
    base = _objective(atoms, weights, result.transform, p)
    g = rng.block_generator(seed, rng.STREAM_PERTURBATION, 0)
    best = -math.inf
    for _ in range(trials):
        k = g.standard_normal((measure.n, measure.n))
        k /= np.linalg.norm(k)
        candidate = _normalize_det((np.eye(measure.n) + epsilon * k) @ result.transform)
        gain = (base - _objective(atoms, weights, candidate, p)) / base
        best = max(best, gain)
    return best


class LpIsotropicPosition(BaseEstimator, TransformerMixin):
    """Volume-preserving whitening to the radially weighted isotropic position.

    sklearn-style transformer: ``fit`` estimates a centering vector and a
    det-1 matrix making the |x|^(p-2)-weighted covariance of the transformed
    data scalar; ``transform`` applies them to new data.

    Parameters
    ----------
    p : float, default=1.0
        Radial weight exponent, 0 < p < 4.  p = 2 is classical whitening.
    tol : float, default=1e-8
        Operator-norm residual at which iteration stops.
    max_iter : int, default=500
        Iteration cap; exceeding it raises NonConvergence.
    damping : float, default=1.0
        Initial step exponent; halved adaptively when a step would
        increase the p-th moment objective.

    Attributes
    ----------
    transform_matrix_ : ndarray of shape (n_features, n_features)
    center_ : ndarray of shape (n_features,)
    result_ : PositionResult with the full iteration record.
    """

    def __init__(self, p=1.0, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, damping=1.0):
        self.p = p
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping

    def fit(self, X, y=None, sample_weight=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array of shape (n_samples, n_features)")
        measure = make_measure(X, sample_weight)
        result = lp_isotropic_position(
            measure, self.p, tol=self.tol, max_iter=self.max_iter, damping=self.damping
        )
        self.n_features_in_ = X.shape[1]
        self.center_ = result.center
        self.transform_matrix_ = result.transform
        self.result_ = result
        return self

    def transform(self, X):
        if not hasattr(self, "transform_matrix_"):
            raise NotFittedError("fit must be called before transform")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have shape (n_samples, {self.n_features_in_})")
        return (X - self.center_) @ self.transform_matrix_.T

    def inverse_transform(self, X):
        if not hasattr(self, "transform_matrix_"):
            raise NotFittedError("fit must be called before inverse_transform")
        X = np.asarray(X, dtype=float)
        return X @ np.linalg.inv(self.transform_matrix_).T + self.center_
