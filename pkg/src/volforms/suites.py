"""Named check suites: reproducible batches of experiments built from a seed."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import experiments as ex
from .errors import ConfigurationError, DomainError
from .grid import (BoundaryPair, TorusGrid, make_grid, normalize, random_admissible_field,
                   sawtooth_modes, trig_field)
from .solver import SolverConfig, solve_geodesic


@dataclass
class SuiteParams:
    grid: TorusGrid = field(default_factory=lambda: make_grid(1, 32, 33))
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 42
    samples: int = 100_000
    lambdas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    eps: float = 2.0**-6
    pairs: int = 10
    triples: int = 10
    families: int = 3
    family_size: int = 9
    perturbation: float = 1e-2
    c_slack: float = ex.C_SLACK


def _rng(params, salt):
    return np.random.default_rng([params.seed, salt])


def _random_pair(grid, rng, margin):
    return BoundaryPair(random_admissible_field(grid, rng), random_admissible_field(grid, rng),
                        grid, margin)


def _perturbation(grid, rng, size):
    """Random low-mode trig field rescaled to sup-norm ``size``."""
    f = random_admissible_field(grid, rng, num_modes=2, kmax=1.5)
    return f * (size / float(np.abs(f).max()))


def sawtooth_pair(grid: TorusGrid, offset: float = 0.0) -> BoundaryPair:
    """Strongly nonlinear test boundary: half-period shifted smoothed sawtooths."""
    k = max(1, grid.n // 4)
    phi0 = trig_field(grid, sawtooth_modes(k, 0.8, 0.0, dim=grid.dim))
    phi1 = trig_field(grid, sawtooth_modes(k, 0.8, 0.5, dim=grid.dim)) + offset
    return BoundaryPair(phi0, phi1, grid)


def run_concavity(p: SuiteParams):
    return [ex.check_concavity(p.samples, p.seed)]


def run_comparison(p: SuiteParams):
    rng = _rng(p, 1)
    out = []
    while len(out) < p.pairs:
        b1 = _random_pair(p.grid, rng, p.solver.ellipticity_guard)
        try:
            b2 = BoundaryPair(b1.phi0 + _perturbation(p.grid, rng, p.perturbation),
                              b1.phi1 + _perturbation(p.grid, rng, p.perturbation), p.grid)
        except DomainError:
            continue
        out.append(ex.check_comparison(b1, b2, 1.0, p.solver, p.c_slack))
    return out


def run_barriers(p: SuiteParams):
    rng = _rng(p, 2)
    out = []
    for _ in range(p.pairs):
        b = _random_pair(p.grid, rng, p.solver.ellipticity_guard)
        rep = solve_geodesic(b, 1.0, p.solver)
        out.append(ex.check_barriers(rep, b))
    return out


def _random_triples(p, salt):
    rng = _rng(p, salt)
    for _ in range(p.triples):
        yield tuple(normalize(random_admissible_field(p.grid, rng), p.grid) for _ in range(3))


def run_triangle(p: SuiteParams):
    return [ex.check_triangle(a, b, c, p.eps, p.grid, p.solver, p.c_slack)
            for a, b, c in _random_triples(p, 3)]


def run_cat0(p: SuiteParams):
    return [ex.check_cat0(a, b, c, p.lambdas, p.eps, p.grid, p.solver, p.c_slack)
            for a, b, c in _random_triples(p, 4)]


def run_lowerbound(p: SuiteParams):
    rng = _rng(p, 5)
    return [ex.check_lower_bound(normalize(random_admissible_field(p.grid, rng), p.grid),
                                 p.eps, p.grid, p.solver, p.c_slack)
            for _ in range(p.triples)]


def run_jacobi(p: SuiteParams):
    rng = _rng(p, 6)
    s_values = np.linspace(0.0, 1.0, p.family_size)
    out = []
    for _ in range(p.families):
        phi0 = random_admissible_field(p.grid, rng)
        psi = random_admissible_field(p.grid, rng)
        fam = ex.solve_family(phi0, [s * psi for s in s_values], s_values, p.eps, p.grid,
                              p.solver, "phi1(s) = s * psi")
        out.append(ex.check_jacobi(fam, p.c_slack))
    return out


def run_energy(p: SuiteParams):
    out = []
    for offset in (0.0, 0.5):
        b = sawtooth_pair(p.grid, offset)
        rep = solve_geodesic(b, 1.0, p.solver)
        for eps in (1.0, 0.5, 0.25):
            if eps != rep.epsilon:
                rep = solve_geodesic(b, eps, p.solver, init=rep.phi, init_boundary=b)
            r = ex.check_energy_constancy(rep, b, p.solver)
            r.details["boundary_offset"] = offset
            out.append(r)
    return out


def run_converge(p: SuiteParams):
    sched = [2.0**-k for k in range(9)]
    return [ex.convergence_study(sawtooth_pair(p.grid), sched, p.solver)]


SUITES = {
    "concavity": run_concavity,
    "comparison": run_comparison,
    "barriers": run_barriers,
    "triangle": run_triangle,
    "cat0": run_cat0,
    "jacobi": run_jacobi,
    "energy": run_energy,
    "lowerbound": run_lowerbound,
    "converge": run_converge,
}


def run_suite(name: str, params: SuiteParams) -> list:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](params)]
    try:
        runner = SUITES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown suite {name!r}; choose from {', '.join(list(SUITES) + ['all'])}") from None
    return runner(params)
