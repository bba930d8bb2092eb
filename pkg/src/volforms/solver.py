"""Newton solver and continuation for P(s, D^2 Phi) = eps.

The unknowns are the interior time slices; the end slices are copied from
the boundary pair and never touched.  The Newton model is exact up to
``s * q_remainder(h)`` because P is quadratic in the second differences.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (ConfigurationError, ContinuationFailure, NonConvergence,
                     SolverError, StepFailure)
from .grid import BoundaryPair
from .operators import (Margins, coefficients, dp_matrix, ellipticity_margins, p_op)

log = logging.getLogger(__name__)


def default_eps_schedule(final=2.0**-10):
    sched = [1.0]
    while sched[-1] > final * (1 + 1e-12):
        sched.append(sched[-1] / 2)
    return sched


@dataclass
class SolverConfig:
    epsilon: float = 1.0
    s_steps: int = 10
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    linear_rel_tol: float = 1e-12
    ellipticity_guard: float = 1e-8
    eps_schedule: list = field(default_factory=default_eps_schedule)
    backtrack_factor: float = 0.5
    min_s_step: float = 1e-6
    max_backtracks: int = 30

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.s_steps < 1:
            raise ConfigurationError("s_steps must be >= 1")
        for name in ("newton_tol", "linear_rel_tol", "ellipticity_guard", "min_s_step"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.newton_max_iters < 1:
            raise ConfigurationError("newton_max_iters must be >= 1")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("backtrack_factor must lie in (0, 1)")


@dataclass
class SolveReport:
    phi: np.ndarray
    s: float
    epsilon: float
    residual_sup: float
    margins: Margins
    newton_iters: list
    s_trace: list
    converged: bool
    residual_history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    sup_change: float | None = None  # sup|Phi - Phi_prev| in an eps sweep
    margin_history: list = field(default_factory=list)  # min margin per accepted iterate

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("phi")
        d["margins"] = dict(self.margins._asdict())
        return d


def residual(s, eps, phi, grid):
    return p_op(s, phi, grid) - eps


def _rel_residual(mat, x, rhs):
    scale = max(np.abs(rhs).max(), np.finfo(float).tiny)
    return float(np.abs(rhs - mat @ x).max() / scale)


def _factor(mat):
    return spla.splu(mat, permc_spec="MMD_AT_PLUS_A")


def _solve_linear(mat, rhs, rel_tol, lu=None):
    """Direct LU with one refinement sweep; raises on a residual above rel_tol."""
    lu = lu or _factor(mat)
    x = lu.solve(rhs)
    hist = [_rel_residual(mat, x, rhs)]
    if hist[-1] > rel_tol:
        x += lu.solve(rhs - mat @ x)
        hist.append(_rel_residual(mat, x, rhs))
    if hist[-1] > rel_tol:
        raise SolverError(f"linear solve stagnated at relative residual {hist[-1]:.3e}", hist)
    return x


class _LinearSolver:
    """Newton linear solves that reuse one LU factorization.

    Later Jacobians are solved by GMRES preconditioned with the stored LU;
    when that fails to reach the tolerance quickly the matrix is refactored.
    """

    def __init__(self, rel_tol, krylov_iters=40):
        self.rel_tol, self.krylov_iters = rel_tol, krylov_iters
        self.lu = None
        self.factorizations = 0

    def solve(self, mat, rhs):
        if self.lu is not None:
            prec = spla.LinearOperator(mat.shape, self.lu.solve)
            x, _ = spla.gmres(mat, rhs, x0=self.lu.solve(rhs), M=prec, rtol=0.1 * self.rel_tol,
                              atol=0.0, restart=self.krylov_iters, maxiter=1)
            if _rel_residual(mat, x, rhs) <= self.rel_tol:
                return x
        self.lu = _factor(mat)
        self.factorizations += 1
        return _solve_linear(mat, rhs, self.rel_tol, self.lu)


def solve_s0(boundary: BoundaryPair, eps: float, linear_rel_tol: float = 1e-12) -> np.ndarray:
    """Cylinder Poisson problem Phi_tt + lap Phi = eps with Dirichlet ends."""
    grid = boundary.grid
    phi = boundary.linear_path()
    r = residual(0.0, eps, phi, grid)
    h = _solve_linear(dp_matrix(0.0, phi, grid), -r.ravel(), linear_rel_tol)
    phi[1:-1] += h.reshape(r.shape)
    return phi


def newton_solve(s: float, eps: float, boundary: BoundaryPair, init, cfg: SolverConfig,
                 linear: _LinearSolver | None = None) -> SolveReport:
    """Globalized Newton at fixed (s, eps) from ``init``.

    ``linear`` may carry a factorization from a nearby problem (continuation).
    """
    grid = boundary.grid
    phi = np.array(grid.check_spacetime(init), dtype=float)
    if not (np.array_equal(phi[0], boundary.phi0) and np.array_equal(phi[-1], boundary.phi1)):
        raise ConfigurationError("initial guess does not carry the boundary slices")
    guard = cfg.ellipticity_guard

    r = residual(s, eps, phi, grid)
    rsup = float(np.abs(r).max())
    history = [rsup]
    margin_trace = []
    linear = linear or _LinearSolver(cfg.linear_rel_tol)
    for it in range(cfg.newton_max_iters + 1):
        if rsup <= cfg.newton_tol:
            margins = ellipticity_margins(s, phi, grid)
            if margins.min() >= guard:
                warns = []
                if margins.min() == guard:
                    warns.append("margins equal the ellipticity guard")
                return SolveReport(phi, s, eps, rsup, margins, [it], [s], True, [history], warns,
                                   margin_history=margin_trace + [margins.min()])
        if it == cfg.newton_max_iters:
            break
        co = coefficients(s, phi, grid)
        h = linear.solve(dp_matrix(s, phi, grid, co), -r.ravel())
        h = h.reshape(r.shape)
        alpha = 1.0
        for _ in range(cfg.max_backtracks):
            trial = phi.copy()
            trial[1:-1] += alpha * h
            r_trial = residual(s, eps, trial, grid)
            t_sup = float(np.abs(r_trial).max())
            trial_margin = ellipticity_margins(s, trial, grid).min()
            ok_margin = trial_margin >= guard
            if ok_margin and (t_sup <= cfg.newton_tol or t_sup < (1 - 1e-4 * alpha) * rsup):
                break
            alpha *= cfg.backtrack_factor
        else:
            raise StepFailure(
                f"line search failed at s={s:g}, eps={eps:g}, residual {rsup:.3e}", history)
        phi, r, rsup = trial, r_trial, t_sup
        history.append(rsup)
        margin_trace.append(trial_margin)
        log.debug("newton s=%g eps=%g it=%d alpha=%g res=%.3e", s, eps, it, alpha, rsup)
    raise NonConvergence(
        f"no convergence in {cfg.newton_max_iters} Newton steps (s={s:g}, eps={eps:g}, "
        f"residual {rsup:.3e})", history)


def continuation_in_s(boundary: BoundaryPair, eps: float, cfg: SolverConfig) -> SolveReport:
    """Walk s from 0 to 1, warm-starting each Newton solve from the last one.

    A failed step is retried with half the s-increment; after a success the
    increment grows back towards ``1 / s_steps``.
    """
    grid = boundary.grid
    phi = solve_s0(boundary, eps, cfg.linear_rel_tol)
    r0 = float(np.abs(residual(0.0, eps, phi, grid)).max())
    s, base = 0.0, 1.0 / cfg.s_steps
    ds = base
    s_trace, iters, hist, warns = [0.0], [1], [[r0]], []
    margin_hist = [ellipticity_margins(0.0, phi, grid).min()]
    report = None
    linear = _LinearSolver(cfg.linear_rel_tol)
    while s < 1.0:
        s_next = min(1.0, s + ds)
        if 1.0 - s_next < 1e-12:
            s_next = 1.0
        try:
            report = newton_solve(s_next, eps, boundary, phi, cfg, linear)
        except SolverError as exc:
            ds /= 2
            warns.append(f"s-step {s:g}->{s_next:g} failed: {exc}")
            if ds < cfg.min_s_step:
                raise ContinuationFailure(
                    f"continuation stalled at s={s:g} (eps={eps:g})", last_good_s=s,
                    epsilon=eps, history=hist) from exc
            continue
        s, phi = s_next, report.phi
        s_trace.append(s)
        iters.extend(report.newton_iters)
        hist.extend(report.residual_history)
        margin_hist.extend(report.margin_history)
        warns.extend(report.warnings)
        ds = min(base, 2 * ds)
    if report is None:  # s_steps reached 1 on the linear solve alone; cannot happen
        raise SolverError("continuation produced no report")
    report.s_trace = s_trace
    report.newton_iters = iters
    report.residual_history = hist
    report.warnings = warns
    report.margin_history = margin_hist
    return report


def _shift_boundary(phi, old: BoundaryPair, new: BoundaryPair):
    """Re-impose new end slices on phi by adding the linear blend of the change."""
    t = new.grid.t.reshape((new.grid.nt,) + (1,) * new.grid.dim)
    out = phi + (1 - t) * (new.phi0 - old.phi0) + t * (new.phi1 - old.phi1)
    out[0] = new.phi0
    out[-1] = new.phi1
    return out


def solve_eps_step(boundary, eps_from, eps_to, init, cfg, depth=0):
    """s = 1 Newton solve at eps_to warm-started from the solution at eps_from.

    On failure the eps interval is split geometrically (up to 8 levels).
    """
    try:
        return newton_solve(1.0, eps_to, boundary, init, cfg)
    except SolverError:
        if depth >= 8:
            raise
    mid = np.sqrt(eps_from * eps_to)
    rep = solve_eps_step(boundary, eps_from, mid, init, cfg, depth + 1)
    return solve_eps_step(boundary, mid, eps_to, rep.phi, cfg, depth + 1)


def continuation_in_eps(boundary: BoundaryPair, cfg: SolverConfig) -> list:
    sched = list(cfg.eps_schedule)
    if not sched:
        raise ConfigurationError("eps_schedule is empty")
    if sched[0] > 1.0 or any(b >= a for a, b in zip(sched, sched[1:])) or sched[-1] <= 0:
        raise ConfigurationError("eps_schedule must be positive, strictly decreasing, start <= 1")
    reports = []
    prev = None
    for eps in sched:
        try:
            if prev is None:
                rep = continuation_in_s(boundary, eps, cfg)
            else:
                rep = solve_eps_step(boundary, prev.epsilon, eps, prev.phi, cfg)
                rep.sup_change = float(np.abs(rep.phi - prev.phi).max())
        except ContinuationFailure:
            raise
        except SolverError as exc:
            raise ContinuationFailure(f"eps continuation failed at eps={eps:g}: {exc}",
                                      last_good_s=1.0, epsilon=eps,
                                      history=exc.history) from exc
        reports.append(rep)
        prev = rep
    return reports


def solve_geodesic(boundary: BoundaryPair, eps: float, cfg: SolverConfig,
                   init=None, init_boundary: BoundaryPair | None = None) -> SolveReport:
    """Converged s = 1 solution at ``eps``.

    With a warm start (``init`` solved for ``init_boundary`` at the same eps)
    a direct Newton solve is tried first.  Otherwise, or if that fails, the
    s-continuation runs at eps = 1 and eps is halved down to the target.
    """
    if init is not None:
        start = _shift_boundary(init, init_boundary, boundary) if init_boundary else init
        try:
            return newton_solve(1.0, eps, boundary, start, cfg)
        except SolverError as exc:
            log.info("warm start failed (%s); falling back to continuation", exc)
    if eps >= 1.0:
        return continuation_in_s(boundary, eps, cfg)
    sched = [1.0]
    while sched[-1] / 2 > eps * (1 + 1e-12):
        sched.append(sched[-1] / 2)
    sched.append(eps)
    sub = SolverConfig(**{**cfg.__dict__, "eps_schedule": sched})
    return continuation_in_eps(boundary, sub)[-1]
