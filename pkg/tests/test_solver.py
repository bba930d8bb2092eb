import json

import numpy as np
import pytest

from volforms.errors import ConfigurationError, ContinuationFailure, NonConvergence, SolverError
from volforms.grid import BoundaryPair, make_grid, random_admissible_field
from volforms.operators import determinant_defect, ellipticity_margins, laplacian
from volforms.solver import (SolverConfig, continuation_in_eps, continuation_in_s,
                             default_eps_schedule, newton_solve, residual, solve_geodesic,
                             solve_s0)


def _oracle(grid, eps, c):
    t = grid.t_field()
    return eps * t * (t - 1) / 2 + c * t


def _const_pair(grid, c0, c1):
    return BoundaryPair(np.full(grid.spatial_shape, c0), np.full(grid.spatial_shape, c1), grid)


@pytest.fixture
def pair1(grid1):
    rng = np.random.default_rng(11)
    return BoundaryPair(random_admissible_field(grid1, rng),
                        random_admissible_field(grid1, rng), grid1)


def test_config_validation():
    for bad in ({"epsilon": 0}, {"s_steps": 0}, {"newton_tol": -1}, {"backtrack_factor": 1.0},
                {"newton_max_iters": 0}):
        with pytest.raises(ConfigurationError):
            SolverConfig(**bad)


def test_default_schedule():
    sched = default_eps_schedule()
    assert sched[0] == 1.0 and sched[-1] == 2.0**-10 and len(sched) == 11


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("eps", [1.0, 0.25, 2.0**-6])
def test_newton_exact_oracle(grid1, s, eps):
    b = _const_pair(grid1, 0.0, 0.5)
    rep = newton_solve(s, eps, b, b.linear_path(), SolverConfig())
    assert np.abs(rep.phi - _oracle(grid1, eps, 0.5)).max() <= 1e-10
    assert rep.converged and rep.residual_sup <= 1e-10


def test_solve_s0_is_linear_solve(pair1):
    phi = solve_s0(pair1, 1.0)
    assert np.abs(residual(0.0, 1.0, phi, pair1.grid)).max() < 1e-10


def test_continuation_random_pair(pair1):
    rep = continuation_in_s(pair1, 1.0, SolverConfig())
    g = pair1.grid
    assert rep.s == 1.0 and rep.s_trace[0] == 0.0 and rep.s_trace[-1] == 1.0
    assert rep.residual_sup <= 1e-10
    assert min(rep.margin_history) > 0 and rep.margins.min() > 0
    assert np.array_equal(rep.phi[0], pair1.phi0) and np.array_equal(rep.phi[-1], pair1.phi1)
    phi_tt = (rep.phi[2:] - 2 * rep.phi[1:-1] + rep.phi[:-2]) / g.dt**2
    assert phi_tt.min() > 0 and (1 + laplacian(rep.phi, g)).min() > 0
    assert np.abs(determinant_defect(1.0, 1.0, rep.phi, g)).max() <= 1e-9
    json.dumps(rep.to_dict())


def test_continuation_2d():
    g = make_grid(2, 12, 13)
    rng = np.random.default_rng(3)
    b = BoundaryPair(random_admissible_field(g, rng), random_admissible_field(g, rng), g)
    rep = continuation_in_s(b, 0.5, SolverConfig())
    assert rep.residual_sup <= 1e-10 and ellipticity_margins(1.0, rep.phi, g).min() > 0


def test_time_reversal_symmetry(pair1):
    cfg = SolverConfig()
    fwd = solve_geodesic(pair1, 1.0, cfg)
    back = solve_geodesic(BoundaryPair(pair1.phi1, pair1.phi0, pair1.grid), 1.0, cfg)
    assert np.abs(fwd.phi[::-1] - back.phi).max() < 1e-9


def test_constant_shift_equivariance(pair1):
    cfg = SolverConfig()
    base = solve_geodesic(pair1, 1.0, cfg)
    shifted = solve_geodesic(pair1.shifted(0.3), 1.0, cfg)
    assert np.abs(shifted.phi - base.phi - 0.3).max() < 1e-9


def test_newton_rejects_bad_initial_guess(pair1):
    with pytest.raises(ConfigurationError):
        newton_solve(1.0, 1.0, pair1, pair1.grid.zeros(), SolverConfig())


def test_newton_iteration_cap_raises(pair1):
    cfg = SolverConfig(newton_max_iters=1)
    with pytest.raises(NonConvergence) as info:
        newton_solve(1.0, 2.0**-8, pair1, pair1.linear_path(), cfg)
    assert isinstance(info.value, SolverError) and len(info.value.history) >= 1


def test_continuation_failure_reports_last_s(pair1):
    cfg = SolverConfig(newton_max_iters=1, min_s_step=0.05)
    with pytest.raises(ContinuationFailure) as info:
        continuation_in_s(pair1, 2.0**-8, cfg)
    assert 0.0 <= info.value.last_good_s < 1.0


def test_eps_schedule_validation(pair1):
    for sched in ([], [0.5, 0.5, 0.25], [2.0, 1.0], [1.0, 0.5, -0.1]):
        with pytest.raises(ConfigurationError):
            continuation_in_eps(pair1, SolverConfig(eps_schedule=sched))


def test_eps_continuation_constant_oracle(grid1):
    # consecutive solutions differ by (delta eps) t(1-t)/2, sup at t=1/2: delta eps / 8
    sched = [1.0, 0.5, 0.25, 0.125]
    reps = continuation_in_eps(_const_pair(grid1, 0.0, 0.5), SolverConfig(eps_schedule=sched))
    for prev, rep in zip(reps, reps[1:]):
        assert rep.sup_change == pytest.approx((prev.epsilon - rep.epsilon) / 8, abs=1e-12)
        assert np.abs(rep.phi - _oracle(grid1, rep.epsilon, 0.5)).max() < 1e-10


def test_eps_continuation_random(pair1):
    reps = continuation_in_eps(pair1, SolverConfig(eps_schedule=[1.0, 0.5, 0.25, 0.125]))
    changes = [r.sup_change for r in reps[1:]]
    assert all(b < a for a, b in zip(changes, changes[1:]))
    assert all(r.residual_sup <= 1e-10 for r in reps)


def test_solve_geodesic_warm_start_matches_cold(pair1):
    cfg = SolverConfig()
    cold = solve_geodesic(pair1, 0.25, cfg)
    warm_src = solve_geodesic(pair1.shifted(0.01), 0.25, cfg)
    warm = solve_geodesic(pair1, 0.25, cfg, init=warm_src.phi, init_boundary=pair1.shifted(0.01))
    assert np.abs(cold.phi - warm.phi).max() < 1e-9


def test_two_mode_example_boundary(grid1):
    # cos(2 pi x) / cos(4 pi x) pair scaled to sup|lap| = 0.3 and 0.2
    x = grid1.x[0]
    p0 = 0.3 / (2 * np.pi) ** 2 * np.cos(2 * np.pi * x)
    p1 = -0.2 / (4 * np.pi) ** 2 * np.cos(4 * np.pi * x)
    rep = continuation_in_s(BoundaryPair(p0, p1, grid1), 1.0, SolverConfig())
    assert rep.converged and rep.residual_sup <= 1e-8 and rep.margins.min() > 0
