"""Numerical checks of the geometric statements: comparison principle, C0
barriers, triangle and CAT(0) inequalities, Jacobi field growth, energy
constancy, the positive-length bound, the algebraic lemmas, and the
eps -> 0 behaviour.

Every check returns a :class:`CheckReport` whose slack is an explicit
function of (eps, h, dt, ds, newton_tol) recorded in ``details``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import (GeodesicFamily, covariant_derivative, distance, energy_elements,
                       jacobi_growth, jacobi_norms)
from .grid import BoundaryPair, TorusGrid, integrate_spatial, normalize
from .operators import gradient, laplacian, log_q_batch, matrix_q, time_derivatives
from .solver import SolveReport, SolverConfig, continuation_in_eps, solve_geodesic

C_SLACK = 10.0


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_violation: float
    slack_used: float
    samples: int = 1
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag}  {self.name:<28} worst={self.worst_violation:.6e} "
                f"slack={self.slack_used:.6e} samples={self.samples}")


def _report(name, worst, slack, samples=1, seed=None, c_slack=None, **details) -> CheckReport:
    worst, slack = float(worst), float(slack)
    passed = worst <= slack
    if not passed and c_slack is not None and slack > 0:
        # smallest multiplier that would have passed
        details["min_c_slack"] = c_slack * worst / slack
    return CheckReport(name, passed, worst, slack, samples, seed, details)


def _grid_slack(eps, grid, c_slack):
    return c_slack * (eps + grid.h**2 + grid.dt**2)


class _Distances:
    """Cached eps-geodesic solves between spatial fields, warm-started."""

    def __init__(self, grid, eps, cfg):
        self.grid, self.eps, self.cfg = grid, eps, cfg
        self._last = None

    def solve(self, a, b) -> SolveReport:
        bnd = BoundaryPair(a, b, self.grid, margin=self.cfg.ellipticity_guard)
        init, init_b = (None, None) if self._last is None else self._last
        rep = solve_geodesic(bnd, self.eps, self.cfg, init=init, init_boundary=init_b)
        self._last = (rep.phi, bnd)
        return rep

    def __call__(self, a, b) -> float:
        return distance(self.solve(a, b).phi, self.grid)


# --- comparison principle and barriers ----------------------------------------

def check_comparison(b1: BoundaryPair, b2: BoundaryPair, eps: float, cfg: SolverConfig,
                     c_slack: float = C_SLACK) -> CheckReport:
    grid = b1.grid
    r1 = solve_geodesic(b1, eps, cfg)
    r2 = solve_geodesic(b2, eps, cfg, init=r1.phi, init_boundary=b1)
    sup_diff = float(np.abs(r1.phi - r2.phi).max())
    bound = max(float(np.abs(b1.phi0 - b2.phi0).max()), float(np.abs(b1.phi1 - b2.phi1).max()))
    slack = c_slack * (grid.h**2 + grid.dt**2) + 2 * cfg.newton_tol
    return _report("comparison", sup_diff - bound, slack, c_slack=c_slack,
                   sup_difference=sup_diff, boundary_bound=bound, epsilon=eps,
                   slack_formula="c*(h^2+dt^2)+2*newton_tol")


def barrier_constant(boundary: BoundaryPair, s: float, eps: float) -> float:
    """Smallest a for which the maximum-principle argument closes.

    Upper barrier: an interior maximum of Phi - Psi_a forces Phi_tt <= -2a,
    contradicting Phi_tt > -(1-s)/s (s > 0), and Phi_tt + lap Phi = eps at
    s = 0 once 2a > max lap phi_i - eps.
    Lower barrier: at an interior minimum of Phi - Psi_{-a},
    P >= s Q(D^2 Psi_{-a}) + (1-s)(2a + m) with
    Q(D^2 Psi_{-a}) >= 2a (1 + m) - G, m = min lap phi_i,
    G = max |grad phi_0 - grad phi_1|^2; both parts must exceed eps.
    """
    grid = boundary.grid
    lap0, lap1 = laplacian(boundary.phi0, grid), laplacian(boundary.phi1, grid)
    m = min(float(lap0.min()), float(lap1.min()))
    big_m = max(float(lap0.max()), float(lap1.max()))
    g = sum((g0 - g1) ** 2 for g0, g1 in zip(gradient(boundary.phi0, grid),
                                             gradient(boundary.phi1, grid)))
    big_g = float(np.max(g))
    a_up = 0.0
    if s > 0:
        a_up = max(a_up, (1 - s) / (2 * s))
    if s < 1:
        a_up = max(a_up, (big_m - eps) / 2)
    a_low = 0.0
    if s > 0:
        a_low = max(a_low, (eps + big_g) / (2 * (1 + m)))
    if s < 1:
        a_low = max(a_low, (eps - m) / 2)
    return max(a_up, a_low)


def barrier_pair(boundary: BoundaryPair, a: float):
    """(Psi_{-a}, Psi_a) with Psi_a = a t (1 - t) + (1 - t) phi0 + t phi1."""
    lin = boundary.linear_path()
    t = boundary.grid.t_field()
    bump = t * (1 - t)
    return lin - a * bump, lin + a * bump


def check_barriers(report: SolveReport, boundary: BoundaryPair, a: float | None = None,
                   slack: float = 1e-8) -> CheckReport:
    if a is None:
        a = barrier_constant(boundary, report.s, report.epsilon)
    lower, upper = barrier_pair(boundary, a)
    over = float((report.phi - upper).max())
    under = float((lower - report.phi).max())
    return _report("barriers", max(over, under), slack, a=a, upper_excess=over,
                   lower_excess=under, s=report.s, epsilon=report.epsilon)


# --- metric inequalities ------------------------------------------------------

def check_triangle(psi, phi0, phi1, eps: float, grid: TorusGrid, cfg: SolverConfig,
                   c_slack: float = C_SLACK) -> CheckReport:
    dist = _Distances(grid, eps, cfg)
    d_psi_0 = dist(psi, phi0)
    d_0_1 = dist(phi0, phi1)
    d_psi_1 = dist(psi, phi1)
    viol = d_psi_1 - d_psi_0 - d_0_1
    return _report("triangle", viol, _grid_slack(eps, grid, c_slack), c_slack=c_slack,
                   d_psi_phi0=d_psi_0, d_phi0_phi1=d_0_1, d_psi_phi1=d_psi_1, epsilon=eps,
                   slack_formula="c*(eps+h^2+dt^2)")


def check_cat0(A, B, C, lambdas, eps: float, grid: TorusGrid, cfg: SolverConfig,
               c_slack: float = C_SLACK) -> CheckReport:
    """Quadrilateral comparison with P taken at time t = lambda on the B -> C solve."""
    lambdas = [float(x) for x in lambdas]
    if not lambdas or any(not 0.0 <= x <= 1.0 for x in lambdas):
        raise ConfigurationError("lambdas must be a non-empty subset of [0, 1]")
    dist = _Distances(grid, eps, cfg)
    bc_path = dist.solve(B, C).phi
    d_bc = distance(bc_path, grid)
    d_ab = dist(A, B)
    d_ac = dist(A, C)
    rows, worst = [], -math.inf
    for lam in lambdas:
        j = int(round(lam * (grid.nt - 1)))
        t_j = float(grid.t[j])
        if j == 0:
            d_ap = d_ab
        elif j == grid.nt - 1:
            d_ap = d_ac
        else:
            d_ap = dist(A, bc_path[j])
        rhs = (1 - t_j) * d_ab**2 + t_j * d_ac**2 - t_j * (1 - t_j) * d_bc**2
        viol = d_ap**2 - rhs
        worst = max(worst, viol)
        rows.append({"lambda": lam, "t_used": t_j, "d_AP": d_ap, "violation": viol})
    scale = max(1.0, d_ab**2, d_ac**2, d_bc**2)
    slack = _grid_slack(eps, grid, c_slack) * scale
    return _report("cat0", worst, slack, samples=len(lambdas), c_slack=c_slack,
                   d_AB=d_ab, d_AC=d_ac, d_BC=d_bc, rows=rows, epsilon=eps,
                   slack_formula="c*(eps+h^2+dt^2)*max(1, d^2)")


# --- Jacobi fields ------------------------------------------------------------

def solve_family(phi0, phi1_members, s_values, eps: float, grid: TorusGrid, cfg: SolverConfig,
                 description: str = "") -> GeodesicFamily:
    """eps-geodesics from ``phi0`` to each ``phi1_members[i]``, warm-started in s."""
    dist = _Distances(grid, eps, cfg)
    phis = [dist.solve(phi0, p1).phi for p1 in phi1_members]
    return GeodesicFamily(np.array(phis), np.asarray(s_values, float), eps, grid, description)


def check_jacobi(fam: GeodesicFamily, c_slack: float = C_SLACK) -> CheckReport:
    """Convexity of |Y(t)| and <Y, D_X Y> >= <Y, Y> at the free end."""
    if len(fam.s_values) < 3 or fam.grid.nt < 3:
        raise ConfigurationError("family needs >= 3 s-samples and >= 3 time nodes")
    y = fam.phi_s()
    scale = max(float(np.abs(y).max()), 1e-300)
    left_fixed = float(np.abs(y[:, 0]).max()) <= 1e-12 * scale
    right_fixed = float(np.abs(y[:, -1]).max()) <= 1e-12 * scale
    if left_fixed:
        work, end = fam, "t=1"
    elif right_fixed:
        work, end = fam.reversed_in_time(), "t=0"
    else:
        raise ConfigurationError("family has no fixed end point (Y vanishes at neither end)")
    dt = work.grid.dt
    worst_convex, worst_growth = -math.inf, -math.inf
    for si in range(len(work.s_values)):
        norms = jacobi_norms(work, si)
        second = (norms[2:] - 2 * norms[1:-1] + norms[:-2]) / dt**2
        worst_convex = max(worst_convex, float(-second.min()))
        ydy, yy = jacobi_growth(work, si, work.grid.nt - 1)
        worst_growth = max(worst_growth, yy - ydy)
    slack = c_slack * (fam.epsilon + dt**2 + fam.ds**2)
    return _report("jacobi", max(worst_convex, worst_growth), slack,
                   samples=len(work.s_values), c_slack=c_slack,
                   worst_convexity_defect=worst_convex, worst_growth_defect=worst_growth,
                   checked_end=end, epsilon=fam.epsilon,
                   slack_formula="c*(eps+dt^2+ds^2)")


# --- energy -------------------------------------------------------------------

def energy_drift(phi, grid: TorusGrid) -> float:
    e = energy_elements(phi, grid)
    return float(e.max() - e.min())


def check_energy_constancy(report: SolveReport, boundary: BoundaryPair, cfg: SolverConfig,
                           half_report: SolveReport | None = None,
                           rounding: float = 1e-12) -> CheckReport:
    """Drift ratio between eps and eps/2 must lie in [1/4, 3/4] (linear-in-eps drift).

    ``rounding`` widens the band edges by a relative 1e-12 so that the exact
    quadratic oracle (ratio 1/4) is not decided by the last bit.
    """
    eps = report.epsilon
    grid = boundary.grid
    floor = 10 * cfg.newton_tol
    if eps < floor:
        return _report("energy", 0.0, rounding, epsilon=eps,
                       note="eps below 10*newton_tol: noise floor, auto-pass")
    if half_report is None:
        half_report = solve_geodesic(boundary, eps / 2, cfg, init=report.phi,
                                     init_boundary=boundary)
    d1 = energy_drift(report.phi, grid)
    d2 = energy_drift(half_report.phi, grid)
    if d1 < floor and d2 < floor:
        return _report("energy", 0.0, rounding, epsilon=eps, drift=d1, drift_half=d2,
                       note="both drifts below 10*newton_tol")
    ratio = d2 / d1 if d1 > 0 else math.inf
    viol = max(0.25 - ratio, ratio - 0.75, 0.0)
    return _report("energy", viol, rounding, epsilon=eps, drift=d1, drift_half=d2,
                   ratio=ratio, fitted_C=d1 / eps, band=[0.25, 0.75])


def lower_bound_value(phi, grid: TorusGrid) -> tuple:
    rho = 1.0 + laplacian(phi, grid)
    pos = integrate_spatial(np.where(phi > 0, phi**2 * rho, 0.0), grid)
    neg = integrate_spatial(np.where(phi < 0, phi**2, 0.0), grid)
    return math.sqrt(max(pos, 0.0)), math.sqrt(neg)


def check_lower_bound(phi, eps: float, grid: TorusGrid, cfg: SolverConfig,
                      c_slack: float = C_SLACK) -> CheckReport:
    phi = grid.check_spatial(phi)
    mean = integrate_spatial(phi, grid)
    if abs(mean) > 1e-12 * (1.0 + float(np.abs(phi).max())):
        raise DomainError(f"phi must be normalized (mean {mean:.3e})")
    pos, neg = lower_bound_value(phi, grid)
    d = _Distances(grid, eps, cfg)(grid.spatial_zeros(), phi)
    bound = max(pos, neg)
    return _report("lowerbound", bound - d, _grid_slack(eps, grid, c_slack), c_slack=c_slack,
                   distance=d, positive_part=pos, negative_part=neg, epsilon=eps)


# --- algebra ------------------------------------------------------------------

def _random_pd(rng, size, dim):
    m = rng.normal(size=(size, dim, dim))
    return m @ np.swapaxes(m, -1, -2) + 1e-3 * np.eye(dim)


def check_concavity(samples: int, seed: int, dim: int = 3, tol: float = 1e-10,
                    batch: int = 20000) -> CheckReport:
    """Random-sample the two algebraic lemmas.

    * midpoint concavity of log(x y - |z|^2) on its cone,
    * Q(A) > 0 for A positive definite,
    * Q(sA + (1-s)B) >= Q(A) and Q(A - B) <= 0 when Q(A) = Q(B) > 0, A_00, B_00 > 0.

    Violations are measured relative to the magnitude of the compared terms.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    sigmas = np.linspace(0.0, 1.0, 11)
    worst = {"log_midpoint": -math.inf, "q_positive": -math.inf,
             "q_convex_comb": -math.inf, "q_difference": -math.inf}
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        # log_q triples inside the cone x y > |z|^2
        x, y = np.exp(rng.uniform(-2, 2, (2, 2, k)))  # each (pair, k)
        dirs = rng.normal(size=(2, k, dim))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        z = dirs * (rng.uniform(0, 0.999, (2, k, 1)) * np.sqrt(x * y)[..., None])
        f1 = log_q_batch(x[0], y[0], z[0])
        f2 = log_q_batch(x[1], y[1], z[1])
        fm = log_q_batch(x.mean(0), y.mean(0), z.mean(0))
        lm = 0.5 * (f1 + f2) - fm
        worst["log_midpoint"] = max(worst["log_midpoint"], float(lm.max()))

        A = _random_pd(rng, k, dim + 1)
        B = _random_pd(rng, k, dim + 1)
        qa, qb = matrix_q(A), matrix_q(B)
        mag_a = A[:, 0, 0] * np.trace(A[:, 1:, 1:], axis1=1, axis2=2)
        worst["q_positive"] = max(worst["q_positive"], float((-qa / mag_a).max()))
        B = B * np.sqrt(qa / qb)[:, None, None]  # now Q(B) = Q(A)
        mag = mag_a + B[:, 0, 0] * np.trace(B[:, 1:, 1:], axis1=1, axis2=2)
        for sg in sigmas:
            comb = matrix_q(sg * A + (1 - sg) * B)
            worst["q_convex_comb"] = max(worst["q_convex_comb"], float(((qa - comb) / mag).max()))
        worst["q_difference"] = max(worst["q_difference"], float((matrix_q(A - B) / mag).max()))
        done += k
    overall = max(worst.values())
    return _report("concavity", overall, tol, samples=samples, seed=seed,
                   **{f"worst_{k}": v for k, v in worst.items()})


# --- eps -> 0 -----------------------------------------------------------------

def weak_c2_monitors(phi, grid: TorusGrid) -> dict:
    td = time_derivatives(phi, grid)
    grad_t = gradient(td.phi_t, grid)
    return {
        "sup_lap": float(np.abs(laplacian(phi, grid)).max()),
        "sup_phi_tt": float(np.abs(td.phi_tt).max()),
        "sup_grad_phi_t": float(np.sqrt(sum(g * g for g in grad_t)).max()),
    }


def convergence_study(boundary: BoundaryPair, eps_schedule, cfg: SolverConfig,
                      variation_tol: float = 0.1) -> CheckReport:
    sched = list(eps_schedule)
    if len(sched) < 3:
        raise ConfigurationError("convergence study needs at least 3 eps values")
    sub = SolverConfig(**{**cfg.__dict__, "eps_schedule": sched})
    reports = continuation_in_eps(boundary, sub)
    grid = boundary.grid
    dists = [r.sup_change for r in reports[1:]]
    monitors = [weak_c2_monitors(r.phi, grid) for r in reports]
    increase = max((b - a for a, b in zip(dists, dists[1:])), default=-math.inf)
    lower = monitors[len(monitors) - len(monitors) // 2:]  # floor(m/2) smallest eps
    variation = {}
    for key in monitors[0]:
        vals = [m[key] for m in lower]
        variation[key] = (max(vals) - min(vals)) / max(max(vals), 1e-300)
    worst = max(increase, max(variation.values()) - variation_tol)
    table = [{"epsilon": r.epsilon, "sup_change": r.sup_change, **m}
             for r, m in zip(reports, monitors)]
    return _report("converge", worst, 0.0, samples=len(sched), table=table,
                   monitor_variation=variation, max_distance_increase=increase,
                   criterion="distances strictly decreasing; lower-half monitor variation < 10%")


def check_covariant_consistency(report: SolveReport, grid: TorusGrid) -> float:
    """sup |D_X X - eps / (1 + lap Phi)| over interior time nodes."""
    phi = report.phi
    phi_t = time_derivatives(phi, grid).phi_t
    dxx = covariant_derivative(phi, phi_t, grid)
    return float(np.abs(dxx - report.epsilon / (1.0 + laplacian(phi, grid)))[1:-1].max())
