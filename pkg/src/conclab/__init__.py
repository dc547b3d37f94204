"""Spherical concentration laboratory for half-space functionals.

Exact kernel evaluation, Monte Carlo verification, moment diagnostics, and
volume-preserving isotropic positioning for finite weighted atom sets.
"""

__version__ = "0.1.0"

from .calculus import (
    CheckResult,
    HomogeneousTestFunction,
    bilinear_form,
    check_rotation_pair_density,
    check_second_order_identity,
    linear_form,
    quadratic_mixture,
    radial_norm,
    second_order_poincare_check,
    spherical_grad_fd,
    spherical_hessian_fd,
)
from .halfspace import (
    FStats,
    OrliczEstimate,
    cube_stats_exact,
    gradient,
    moment_norms,
    orlicz_norm,
    spherical_gradient,
    stats_exact,
    stats_mc,
    third_moment_variance_exact,
    third_moment_variance_mc,
    value,
)
from .kernels import (
    SphericalConstants,
    cubic_pair_kernel,
    halfspace_pair_kernel,
    halfspace_profile,
    halfspace_profile_series,
    plus_mean,
    plus_pair_kernel,
    plus_pair_profile,
    plus_pair_profile_series,
    polar_constant,
    polar_constant1_inv_sq_series,
    rotation_density_constant,
)
from .measure import (
    DiscreteMeasure,
    MomentReport,
    center_of_mass,
    cov1,
    cross_polytope_measure,
    cube_measure,
    first_moment_scale,
    load_measure,
    lp_covariance,
    lp_scale,
    make_measure,
    moment_beta,
    moment_delta,
    moment_report,
    sample_cube_subset,
    sample_gaussian,
    sample_laplace_product,
    sample_rotation_orbit,
    sample_uniform_cube,
    save_measure,
)
from .position import (
    DegenerateSupport,
    LpIsotropicPosition,
    NonConvergence,
    PositionResult,
    ProximityReport,
    is_lp_isotropic,
    isotropic_position,
    lp_isotropic_position,
    proximity_report,
    uniqueness_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
