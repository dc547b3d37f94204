"""Reproducible experiment scenarios over the whole toolkit.

Each runner assembles a :class:`RunReport`: a list of per-(scenario, n,
seed) rows plus named pass/fail assertions.  Reports are fully determined by
the scenario parameters and the seed; wall-clock time is recorded outside
the deterministic payload.

Universal constants the variance bounds leave unnamed are frozen here after
one calibration run at a small anchor dimension (values recorded next to
each constant), then enforced at larger n, which keeps every scaling claim
falsifiable without invented numbers.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, halfspace, position
from .calculus import (
    bilinear_form,
    check_rotation_pair_density,
    check_second_order_identity,
    rotation_density_quadrature_error,
)
from .kernels import (
    HALFSPACE_PROFILE_CUBIC,
    cubic_pair_kernel,
    halfspace_pair_kernel,
    halfspace_profile,
    plus_pair_kernel,
    plus_pair_profile,
    plus_pair_profile_series,
    polar_constant,
    polar_constant1_inv_sq_series,
)
from .measure import (
    cube_measure,
    load_measure,
    lp_scale,
    moment_report,
    sample_cube_subset,
    sample_gaussian,
    sample_laplace_product,
    sample_uniform_cube,
)
from .rng import STREAM_UNIT_PAIRS, block_generator, sample_sphere

DEFAULT_SEED = 20240801

# Frozen scaling constants, each calibrated once from this package's own
# exact computations at the anchor noted, then held fixed:
#   cube scan:   n^3 Var at n = 16 is 0.0296707; the scan checks [0.5x, 2x].
CUBE_ANCHOR_N = 16
#   subset scan: max n^2 Var over 50 seeds at n = 6, N = round(6^2.5) = 88
#   was 0.27554; frozen with a 2x margin and checked at larger n.
SUBSET_VAR_CONSTANT = 0.551
#   first-order inequality: Var <= C (1+beta) alpha^2 / n^2 with C frozen at
#   10x the cube ratio at n = 8 (0.00117866); the margin covers every
#   near-scalar family shipped (gaussian samples max 0.00278, rotation
#   orbits max 0.00233, cube family max 0.00259).
FIRST_ORDER_CONSTANT = 0.0117866
#   cube-family inequality: Var <= C' (1+gamma+delta) alpha^2 / n^3 with C'
#   frozen at 2x the n = 8 cube ratio (0.00282877); the cube ratio peaks at
#   0.00375 (n = 4) and decays beyond.
CUBE_ORDER_CONSTANT = 0.0056575
# Gate for "scalar-within-tol" weighted covariance: sampled families sit at
# operator deviation 0.06-0.09 for N = 50 n^2 atoms; measures beyond the
# gate (for example n^2.5-point subsets at ~0.3) are excluded from the
# first-order assertion and handled by their own scaling constant.
COV1_SCALAR_GATE = 0.2

FAMILY_SAMPLERS = {
    "gaussian": sample_gaussian,
    "laplace": sample_laplace_product,
    "uniform-cube": sample_uniform_cube,
}


@dataclass
class ExperimentSpec:
    """Validated parameters of one scenario run."""

    scenario: str
    n_list: list = field(default_factory=list)
    seed: int = DEFAULT_SEED
    samples: int = 100_000
    p_list: list = field(default_factory=lambda: [1.0, 2.0])
    tol: float = None
    threads: int = 1
    families: list = field(default_factory=lambda: sorted(FAMILY_SAMPLERS))
    measure_path: str = None
    atoms: int = 0
    delta_exp: float = 0.5
    num_seeds: int = 20
    use_mc: bool = False

    KNOWN = (
        "cube-scan",
        "subset",
        "thm5",
        "identities",
        "third-moment",
        "moments",
        "position",
        "var",
    )

    def __post_init__(self):
        if self.scenario not in self.KNOWN:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {self.KNOWN}")
        if self.seed < 0 or self.seed > 2 ** 64 - 1:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.samples < 2:
            raise ValueError("samples must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if any(n < 1 for n in self.n_list):
            raise ValueError("dimensions must be >= 1")
        for fam in self.families:
            if fam not in FAMILY_SAMPLERS:
                raise ValueError(f"unknown family {fam!r}; choose from {sorted(FAMILY_SAMPLERS)}")


@dataclass
class RunReport:
    """Scenario output: rows of statistics plus named assertions."""

    scenario: str
    seed: int
    rows: list
    assertions: list
    version: str = __version__
    wall_clock_s: float = 0.0

    @property
    def passed(self):
        return all(a["passed"] for a in self.assertions)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "version": self.version,
            "passed": self.passed,
            "rows": self.rows,
            "assertions": self.assertions,
            "wall_clock_s": self.wall_clock_s,
        }


def _assertion(name, passed, detail=""):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _timed(scenario, seed, builder):
    start = time.perf_counter()
    rows, assertions = builder()
    return RunReport(
        scenario=scenario,
        seed=seed,
        rows=rows,
        assertions=assertions,
        wall_clock_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Scenario: cube-scan


def run_cube_scan(n_list=None, threads=1, seed=DEFAULT_SEED):
    """Exact cube statistics across dimensions with the 1/n^3 scaling check."""
    n_list = list(n_list) if n_list else list(range(4, 129))

    def build():
        rows = []
        anchor = CUBE_ANCHOR_N ** 3 * halfspace.cube_stats_exact(CUBE_ANCHOR_N).var_F
        for n in n_list:
            stats = halfspace.cube_stats_exact(n)
            beta = 3.0 - 2.0 / n
            delta = (n + 15.0 * n * (n - 1) + 15.0 * n * (n - 1) * (n - 2)) / n ** 3
            rows.append(
                {
                    "scenario": "cube-scan",
                    "n": n,
                    "var_F": stats.var_F,
                    "n2_var": n ** 2 * stats.var_F,
                    "n3_var": n ** 3 * stats.var_F,
                    "beta": beta,
                    "delta": delta,
                    "mean_F": stats.mean_F,
                    "grad_s_sq": stats.grad_s_sq,
                }
            )
        scaled = [r["n3_var"] for r in rows if r["n"] > 1]
        in_band = all(0.5 * anchor <= v <= 2.0 * anchor for v in scaled)
        assertions = [
            _assertion(
                "n3-var-in-band",
                in_band,
                f"n^3 Var in [{0.5 * anchor:.6g}, {2 * anchor:.6g}] across the scan",
            )
        ]
        return rows, assertions

    return _timed("cube-scan", seed, build)


# ---------------------------------------------------------------------------
# Scenario: subset


def run_subset_experiment(
    n=10, delta_exp=0.5, num_seeds=20, seed=DEFAULT_SEED, threads=1
):
    """Random sign-vector subsets: variance scaling and moment diagnostics."""

    def build():
        count = max(1, round(n ** (2.0 + delta_exp)))
        rows = []
        failures = 0
        for k in range(num_seeds):
            sub_seed = seed + k
            sub = sample_cube_subset(n, count, sub_seed)
            report = moment_report(sub, threads=threads)
            stats = halfspace.stats_exact(sub, threads=threads)
            n2_var = n ** 2 * stats.var_F
            ok = (
                n2_var <= SUBSET_VAR_CONSTANT
                and report.kappa <= 1.0
                and report.lambda_ <= 1.0
                and abs(report.zeta - 1.0) <= 1e-12
            )
            failures += 0 if ok else 1
            rows.append(
                {
                    "scenario": "subset",
                    "n": n,
                    "seed": sub_seed,
                    "N": count,
                    "var_F": stats.var_F,
                    "n2_var": n2_var,
                    "kappa": report.kappa,
                    "lambda": report.lambda_,
                    "zeta": report.zeta,
                    "beta": report.beta,
                    "beta_anomaly": bool(report.beta >= 0.5 * n),
                    "passed": ok,
                }
            )
        allowed = max(1, num_seeds // 20)
        assertions = [
            _assertion(
                "subset-pass-rate",
                failures <= allowed,
                f"{num_seeds - failures}/{num_seeds} seeds within the frozen "
                f"constant {SUBSET_VAR_CONSTANT} and moment bounds",
            )
        ]
        return rows, assertions

    return _timed("subset", seed, build)


# ---------------------------------------------------------------------------
# Scenario: thm5 (log-concave tail scaling)


def run_thm5(
    families=None,
    n_list=(8, 16, 32, 64),
    atoms_per_nsq=12,
    p_list=(1.0, 2.0, 4.0),
    mc_samples=100_000,
    seed=DEFAULT_SEED,
    threads=1,
):
    """Tail scaling of F over positioned log-concave samples.

    Samples N = atoms_per_nsq * n^2 atoms per cell (the empirical functional
    has sampling variance ~1/N, so N must grow like n^2 for the population
    1/n^2 law to show), positions each sample at p = 1, then measures the
    central moment norms and the exponential Orlicz norm by Monte Carlo.
    """
    families = list(families) if families else sorted(FAMILY_SAMPLERS)

    def build():
        rows = []
        assertions = []
        slopes = {}
        for family in families:
            sampler = FAMILY_SAMPLERS[family]
            norm2 = []
            psi1_scaled = []
            for n in n_list:
                count = atoms_per_nsq * n * n
                raw = sampler(n, count, seed)
                result = position.lp_isotropic_position(raw, 1.0)
                positioned = result.apply(raw)
                f_vals = halfspace.sample_functional(positioned, mc_samples, seed)
                deviations = np.abs(f_vals - f_vals.mean())
                norms = {
                    p: float(np.mean(deviations ** p) ** (1.0 / p)) for p in p_list
                }
                orlicz = halfspace.orlicz_norm(f_vals, 1)
                mean_f = float(f_vals.mean())
                mean_abs_atom = float(positioned.weights @ positioned.norms)
                from .kernels import plus_mean

                rows.append(
                    {
                        "scenario": "thm5",
                        "family": family,
                        "n": n,
                        "N": count,
                        "mean_F": mean_f,
                        "mean_F_exact": plus_mean(n) * mean_abs_atom,
                        "psi1_norm": orlicz.norm,
                        "n_psi1": n * orlicz.norm,
                        **{f"norm_p{p:g}": v for p, v in norms.items()},
                        **{f"n_norm_p{p:g}_per_p": n * v / p for p, v in norms.items()},
                        "position_iterations": result.iterations,
                    }
                )
                norm2.append(norms.get(2.0))
                psi1_scaled.append(n * orlicz.norm)
            if 2.0 in p_list and len(n_list) >= 2:
                logs_n = np.log(np.array(n_list, dtype=float))
                logs_v = np.log(np.array(norm2))
                slope = float(np.polyfit(logs_n, logs_v, 1)[0])
                slopes[family] = slope
                assertions.append(
                    _assertion(
                        f"slope-{family}",
                        -1.25 <= slope <= -0.75,
                        f"log-log slope of the central 2-norm is {slope:.3f}",
                    )
                )
            bound = 2.0 * psi1_scaled[0]
            assertions.append(
                _assertion(
                    f"psi1-bounded-{family}",
                    all(v <= bound for v in psi1_scaled),
                    f"n * psi1 stays within 2x its first-cell value {psi1_scaled[0]:.4g}",
                )
            )
        return rows, assertions

    return _timed("thm5", seed, build)


# ---------------------------------------------------------------------------
# Scenario: identities


def _series_checks(seed):
    rows = []
    # Quartic truncation of the pair profile: remainder / t^6 stays below
    # 0.02 on |t| <= 0.5 (the next series coefficient is 1/80).  Below
    # |t| ~ 0.05 the true remainder (~t^6/80) sinks under the 1e-16
    # rounding floor of the profile itself, so the grid starts there.
    grid = np.linspace(-0.5, 0.5, 2001)
    grid = grid[np.abs(grid) >= 0.05]
    remainder = np.abs(plus_pair_profile(grid) - plus_pair_profile_series(grid, 4))
    ratio = float(np.max(remainder / np.abs(grid) ** 6))
    rows.append(
        {
            "check": "plus-profile-quartic-remainder",
            "estimate": ratio,
            "target": 1.0 / 80.0,
            "passed": ratio <= 0.02,
        }
    )
    # Large-n series for the inverse square of the one-homogeneous polar
    # constant: n^4-scaled error stays bounded (0.4 frozen from a scan).
    errs = []
    for n in (8, 16, 64, 256, 1024, 4096):
        exact = polar_constant(n, 1) ** -2
        errs.append(abs(exact - polar_constant1_inv_sq_series(n)) * n ** 4)
    rows.append(
        {
            "check": "polar-constant-series-n4-error",
            "estimate": max(errs),
            "target": 0.0,
            "passed": max(errs) <= 0.4,
        }
    )
    return rows


def measure_halfspace_profile_cubic(h=1e-2):
    """Cubic series coefficient of the half-space profile by differences."""
    third = (
        halfspace_profile(2 * h)
        - 2.0 * halfspace_profile(h)
        + 2.0 * halfspace_profile(-h)
        - halfspace_profile(-2 * h)
    ) / (2.0 * h ** 3)
    return float(third) / 6.0


def _cubic_coefficient_check(expected=HALFSPACE_PROFILE_CUBIC, alternative=1.0 / (12 * math.pi)):
    measured = measure_halfspace_profile_cubic()
    ok = abs(measured - expected) <= 1e-3 and abs(measured - alternative) > 10 * abs(
        measured - expected
    )
    return {
        "check": "halfspace-profile-cubic",
        "estimate": measured,
        "target": expected,
        "alternative": alternative,
        "alternative_rejected": bool(abs(measured - alternative) > 1e-2),
        "passed": ok,
    }


def _kernel_mc_checks(seed, samples, dims=(3, 8, 32), pairs=8, z_limit=4.0):
    rows = []
    for n in dims:
        g = block_generator(seed, STREAM_UNIT_PAIRS, n)
        units = g.standard_normal((2 * pairs, n))
        units /= np.linalg.norm(units, axis=1)[:, None]
        theta = sample_sphere(seed + n, n, samples)
        u = theta @ units[0::2].T
        v = theta @ units[1::2].T
        t = np.einsum("ij,ij->i", units[0::2], units[1::2])
        specs = [
            ("plus-pair", np.maximum(u, 0.0) * np.maximum(v, 0.0), plus_pair_kernel(t, n)),
            ("halfspace-pair", ((u >= 0.0) & (v >= 0.0)).astype(float), halfspace_pair_kernel(t)),
            ("cubic-pair", (u * u * u) * (v * v * v), cubic_pair_kernel(t, n)),
        ]
        for name, samples_mat, exact in specs:
            est = samples_mat.mean(axis=0)
            se = samples_mat.std(axis=0, ddof=1) / math.sqrt(samples)
            z = np.max(np.abs(est - exact) / se)
            rows.append(
                {
                    "check": f"kernel-mc-{name}-n{n}",
                    "estimate": float(z),
                    "target": 0.0,
                    "passed": bool(z <= z_limit),
                }
            )
    return rows


def run_identity_suite(
    seed=DEFAULT_SEED,
    samples=200_000,
    density_constant=None,
    profile_cubic=HALFSPACE_PROFILE_CUBIC,
    threads=1,
):
    """Every closed-form identity against an independent numeric oracle.

    ``density_constant`` and ``profile_cubic`` exist so tests can inject
    perturbed values and confirm the corresponding rows fail.
    """

    def build():
        rows = []
        rows.extend(_kernel_mc_checks(seed, samples))
        rows.extend(_series_checks(seed))
        rows.append(_cubic_coefficient_check(expected=profile_cubic))
        pair = check_rotation_pair_density(
            10, samples, seed, density_constant=density_constant
        )
        rows.append(
            {
                "check": "rotation-pair-density",
                "estimate": pair.estimate,
                "target": pair.target,
                "moment_estimate": pair.extra["moment_estimate"],
                "moment_target": pair.extra["moment_target"],
                "passed": pair.passed,
            }
        )
        quad_err = max(rotation_density_quadrature_error(n) for n in (4, 8, 16, 32, 64))
        rows.append(
            {
                "check": "rotation-density-quadrature",
                "estimate": quad_err,
                "target": 0.0,
                "passed": quad_err <= 1e-10,
            }
        )
        ident = check_second_order_identity(
            bilinear_form(_unit(6, 0), _unit(6, 1)), 6, min(samples, 100_000), seed
        )
        rows.append(
            {
                "check": "second-order-identity",
                "estimate": ident.estimate,
                "target": 0.0,
                "std_err": ident.std_err,
                "passed": ident.passed,
            }
        )
        assertions = [
            _assertion(row["check"], row["passed"]) for row in rows
        ]
        return rows, assertions

    return _timed("identities", seed, build)


def _unit(n, axis):
    out = np.zeros(n)
    out[axis] = 1.0
    return out


# ---------------------------------------------------------------------------
# Scenario: third-moment


def run_third_moment(
    measure=None, n=8, seed=DEFAULT_SEED, samples=200_000, threads=1
):
    """Exact third-moment functional with a Monte Carlo cross-check."""

    def build():
        rows = []
        assertions = []
        targets = []
        if measure is not None:
            targets.append(("input-measure", measure))
        else:
            cube = cube_measure(min(n, 12))
            shifted = cube_measure(min(n, 12))
            from .measure import make_measure

            shift = np.zeros(shifted.n)
            shift[0] = 0.5
            shifted = make_measure(shifted.atoms + shift, shifted.weights)
            single = make_measure(np.eye(n)[:1])
            targets = [
                ("cube", cube),
                ("shifted-cube", shifted),
                ("single-atom", single),
            ]
        for label, target in targets:
            exact = halfspace.third_moment_variance_exact(target, threads=threads)
            mc, se = halfspace.third_moment_variance_mc(target, samples, seed)
            gap = abs(mc - exact)
            ok = gap <= 4.0 * se if se > 0 else gap <= 1e-12
            rows.append(
                {
                    "scenario": "third-moment",
                    "measure": label,
                    "n": target.n,
                    "exact": exact,
                    "mc": mc,
                    "mc_std_err": se,
                    "passed": ok,
                }
            )
            assertions.append(_assertion(f"third-moment-mc-{label}", ok, f"|gap| = {gap:.3g}"))
            if label == "cube":
                sym_ok = abs(exact) <= 1e-12
                assertions.append(
                    _assertion("third-moment-symmetric-zero", sym_ok, f"exact = {exact:.3g}")
                )
        return rows, assertions

    return _timed("third-moment", seed, build)


# ---------------------------------------------------------------------------
# Scenario: moments / position / var on a measure


def _resolve_measure(spec):
    if spec.measure_path:
        return load_measure(spec.measure_path)
    if not spec.n_list:
        raise ValueError("need --measure or --n with --family")
    family = spec.families[0]
    count = spec.atoms or 50 * spec.n_list[0] ** 2
    return FAMILY_SAMPLERS[family](spec.n_list[0], count, spec.seed)


def run_moments(spec):
    """Moment diagnostics of one measure."""

    def build():
        target = _resolve_measure(spec)
        report = moment_report(target, p_values=spec.p_list, threads=spec.threads)
        row = {"scenario": "moments", "n": target.n, "N": target.size}
        row.update(report.to_dict())
        row["z_p"] = str(row["z_p"])
        ok = (
            math.isfinite(report.beta)
            and math.isfinite(report.delta)
            and report.beta >= 0.0
            and report.delta >= 0.0
            and report.alpha > 0.0
        )
        return [row], [_assertion("moments-finite", ok)]

    return _timed("moments", spec.seed, build)


def run_position(spec):
    """Position one measure at each requested exponent."""

    def build():
        target = _resolve_measure(spec)
        tol = spec.tol if spec.tol is not None else position.DEFAULT_TOL
        rows = []
        assertions = []
        for p in spec.p_list:
            result = position.lp_isotropic_position(target, p, tol=tol)
            det = float(np.linalg.det(result.transform))
            trace = result.objective_trace
            monotone = all(
                trace[i + 1] <= trace[i] * (1.0 + 1e-9) for i in range(len(trace) - 1)
            )
            rows.append(
                {
                    "scenario": "position",
                    "n": target.n,
                    "N": target.size,
                    "p": p,
                    "residual": result.residual,
                    "iterations": result.iterations,
                    "det": det,
                    "objective_first": trace[0],
                    "objective_last": trace[-1],
                    "converged": result.converged,
                }
            )
            assertions.append(
                _assertion(
                    f"position-p{p:g}",
                    result.residual <= tol and abs(det - 1.0) <= 1e-9 and monotone,
                    f"residual {result.residual:.3e} in {result.iterations} iterations",
                )
            )
        return rows, assertions

    return _timed("position", spec.seed, build)


def run_var(spec):
    """Exact spherical statistics of one measure, optionally with MC."""

    def build():
        target = _resolve_measure(spec)
        stats = halfspace.stats_exact(target, threads=spec.threads)
        row = {"scenario": "var", "n": target.n, "N": target.size}
        row.update(stats.to_dict())
        row.pop("mc_std_err")
        rows = [row]
        assertions = []
        if target.n > 1:
            poincare_ok = (
                stats.var_F <= stats.grad_s_sq / (target.n - 1) + 1e-10
            )
            assertions.append(
                _assertion(
                    "poincare-sanity",
                    poincare_ok,
                    f"Var {stats.var_F:.3e} vs gradient bound "
                    f"{stats.grad_s_sq / (target.n - 1):.3e}",
                )
            )
        if spec.use_mc:
            mc = halfspace.stats_mc(target, spec.samples, spec.seed)
            mc_row = {"scenario": "var-mc", "n": target.n, "N": target.size}
            mc_row.update(mc.to_dict())
            se = mc_row.pop("mc_std_err")
            for key, err in se.items():
                mc_row[f"se_{key}"] = err
            rows.append(mc_row)
            z_vals = {
                key: abs(getattr(mc, key) - getattr(stats, key)) / se[key]
                for key in ("mean_F", "second_moment_F", "grad_s_sq")
                if se[key] > 0
            }
            worst = max(z_vals.values()) if z_vals else 0.0
            assertions.append(
                _assertion(
                    "mc-matches-exact",
                    worst <= 4.0,
                    f"worst |z| = {worst:.2f} across {sorted(z_vals)}",
                )
            )
        return rows, assertions

    return _timed("var", spec.seed, build)


# ---------------------------------------------------------------------------
# Dispatch


def run_scenario(spec):
    """Execute one validated :class:`ExperimentSpec`."""
    if spec.scenario == "cube-scan":
        return run_cube_scan(spec.n_list or None, threads=spec.threads, seed=spec.seed)
    if spec.scenario == "subset":
        n = spec.n_list[0] if spec.n_list else 10
        return run_subset_experiment(
            n=n,
            delta_exp=spec.delta_exp,
            num_seeds=spec.num_seeds,
            seed=spec.seed,
            threads=spec.threads,
        )
    if spec.scenario == "thm5":
        return run_thm5(
            families=spec.families,
            n_list=tuple(spec.n_list) if spec.n_list else (8, 16, 32, 64),
            p_list=tuple(spec.p_list),
            mc_samples=spec.samples,
            seed=spec.seed,
            threads=spec.threads,
        )
    if spec.scenario == "identities":
        return run_identity_suite(seed=spec.seed, samples=spec.samples, threads=spec.threads)
    if spec.scenario == "third-moment":
        measure = load_measure(spec.measure_path) if spec.measure_path else None
        return run_third_moment(
            measure=measure,
            n=spec.n_list[0] if spec.n_list else 8,
            seed=spec.seed,
            samples=spec.samples,
            threads=spec.threads,
        )
    if spec.scenario == "moments":
        return run_moments(spec)
    if spec.scenario == "position":
        return run_position(spec)
    if spec.scenario == "var":
        return run_var(spec)
    raise ValueError(f"unhandled scenario {spec.scenario!r}")
