import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volforms.errors import ConfigurationError, DomainError
from volforms.experiments import check_covariant_consistency
from volforms.geometry import (GeodesicFamily, clamp_elements, covariant_derivative,
                               curvature_operator_2d, distance, energy, energy_element,
                               energy_elements, jacobi_growth, jacobi_norm, jacobi_norms,
                               metric_pairing, sectional_curvature, time_weights)
from volforms.grid import BoundaryPair, make_grid, random_admissible_field, trig_field
from volforms.solver import SolverConfig, solve_geodesic


def _oracle(grid, eps, c):
    t = grid.t_field()
    return eps * t * (t - 1) / 2 + c * t


def test_time_weights():
    w, rule = time_weights(make_grid(1, 8, 33))
    assert rule == "simpson" and w.sum() == pytest.approx(1.0, abs=1e-15)
    w, rule = time_weights(make_grid(1, 8, 6))
    assert rule == "trapezoid" and w.sum() == pytest.approx(1.0, abs=1e-15)


def test_metric_pairing(grid2, rng):
    u, v = rng.normal(size=(2,) + grid2.spatial_shape)
    zero = grid2.spatial_zeros()
    assert metric_pairing(zero, u, v, grid2) == pytest.approx(np.mean(u * v), rel=1e-13)
    phi = random_admissible_field(grid2, rng)
    assert metric_pairing(phi, u, v, grid2) == pytest.approx(metric_pairing(phi, v, u, grid2))
    assert metric_pairing(phi, u, u, grid2) > 0
    bad = trig_field(grid2, [((1, 0), 0.1, 0.0)])
    with pytest.raises(DomainError):
        metric_pairing(bad, u, v, grid2)


@pytest.mark.parametrize("eps,c", [(0.25, 0.5), (1.0, 0.0), (0.5, 2.0)])
def test_energy_oracle(grid1, eps, c):
    # E(t) = (eps (t - 1/2) + c)^2; path energy 1/2 (c^2 + eps^2 / 12)
    phi = _oracle(grid1, eps, c)
    e = energy_elements(phi, grid1)
    assert np.allclose(e, (eps * (grid1.t - 0.5) + c) ** 2, atol=1e-13)
    assert energy(phi, grid1) == pytest.approx(0.5 * (c**2 + eps**2 / 12), abs=1e-13)
    assert energy_element(phi, 0, grid1) == pytest.approx(e[0])
    with pytest.raises(IndexError):
        energy_element(phi, grid1.nt, grid1)


def test_distance_constants(grid1):
    # d = int |eps (t - 1/2) + c| dt = c when c >= eps / 2
    assert distance(_oracle(grid1, 0.25, 0.5), grid1) == pytest.approx(0.5, abs=1e-14)
    assert distance(_oracle(grid1, 0.5, 0.25), grid1) == pytest.approx(0.25, abs=1e-14)


def test_clamp():
    e, count = clamp_elements([1.0, -1e-14, 0.5])
    assert count == 1 and e[1] == 0.0
    with pytest.raises(DomainError):
        clamp_elements([1.0, -1e-3])


def test_covariant_derivative_oracle(grid1):
    phi = _oracle(grid1, 0.3, 0.5)
    dxx = covariant_derivative(phi, np.gradient(phi, grid1.dt, axis=0, edge_order=2), grid1)
    assert np.allclose(dxx, 0.3, atol=1e-12)


def test_covariant_consistency_converges_in_dt():
    # D_X X = eps / (1 + lap Phi) along a solution, up to time discretization.
    # Low modes only: a mode k leaves a t-layer of width ~ 1/(2 pi k) at each end.
    errs = []
    for nt in (17, 33, 65):
        g = make_grid(1, 32, nt)
        rng = np.random.default_rng(5)
        b = BoundaryPair(random_admissible_field(g, rng, kmax=1.5),
                         random_admissible_field(g, rng, kmax=1.5), g)
        errs.append(check_covariant_consistency(solve_geodesic(b, 0.5, SolverConfig()), g))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.6 * errs[0]


def test_curvature_benchmark_order():
    errs = []
    for n in (16, 32, 64):
        g = make_grid(2, n, 3)
        a = trig_field(g, [((1, 0), 1.0, 0.0)])
        b = trig_field(g, [((0, 1), 1.0, 0.0)])
        k = sectional_curvature(g.spatial_zeros(), a, b, g)
        errs.append(abs(k + 4 * np.pi**4) / (4 * np.pi**4))
    assert errs[1] < 0.02 and errs[2] < 0.005
    assert np.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.1)


def test_curvature_1d_is_zero(grid1, rng):
    a, b = rng.normal(size=(2, 32))
    assert sectional_curvature(grid1.spatial_zeros(), a, b, grid1) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([2, 3]))
def test_curvature_nonpositive_and_symmetric(seed, dim):
    rng = np.random.default_rng(seed)
    g = make_grid(dim, 8, 3)
    phi = random_admissible_field(g, rng)
    a, b = rng.normal(size=(2,) + g.spatial_shape)
    k = sectional_curvature(phi, a, b, g)
    assert k <= 0
    assert k == pytest.approx(sectional_curvature(phi, b, a, g), rel=1e-12)
    assert sectional_curvature(phi, 2 * a, b, g) == pytest.approx(4 * k, rel=1e-12)
    assert abs(sectional_curvature(phi, a, a, g)) <= 1e-12 * abs(k) + 1e-300


def test_curvature_operator_matches_sectional():
    diffs = []
    for n in (32, 64):
        g = make_grid(2, n, 3)
        phi = trig_field(g, [((1, 1), 0.005, 0.3)])
        a = trig_field(g, [((1, 0), 1.0, 0.0), ((1, 2), 0.2, 1.0)])
        b = trig_field(g, [((0, 1), 1.0, 0.5)])
        diffs.append(abs(curvature_operator_2d(phi, a, b, g) - sectional_curvature(phi, a, b, g)))
    assert 1.8 <= np.log2(diffs[0] / diffs[1]) <= 2.2


def test_curvature_operator_rejects_other_dims(grid1):
    z = grid1.spatial_zeros()
    with pytest.raises(ConfigurationError):
        curvature_operator_2d(z, z, z, grid1)


def test_family_phi_s_exact_on_linear_family(grid1, rng):
    base = rng.normal(size=grid1.shape)
    direction = rng.normal(size=grid1.shape)
    s = np.linspace(0, 1, 5)
    fam = GeodesicFamily([base + si * direction for si in s], s, 0.1, grid1)
    y = fam.phi_s()
    assert np.allclose(y, direction[None], atol=1e-12)
    rev = fam.reversed_in_time()
    assert np.array_equal(rev.phis[2], fam.phis[2][::-1])
    with pytest.raises(ConfigurationError):
        GeodesicFamily(fam.phis[:2], s[:2], 0.1, grid1).phi_s()
    with pytest.raises(ConfigurationError):
        GeodesicFamily(fam.phis, s[:3], 0.1, grid1)


def test_jacobi_quantities_on_flat_family(grid1):
    # Phi(t, s) = s t: Y = t, D_X Y = 1, |Y(t)| = t, <Y, D_X Y> = <Y, Y> at t = 1
    s = np.linspace(0, 1, 5)
    t = grid1.t_field()
    fam = GeodesicFamily([si * t for si in s], s, 0.0, grid1)
    assert np.allclose(jacobi_norms(fam, 2), grid1.t, atol=1e-13)
    assert jacobi_norm(fam, 2, grid1.nt - 1) == pytest.approx(1.0)
    ydy, yy = jacobi_growth(fam, 3, grid1.nt - 1)
    assert ydy == pytest.approx(1.0) and yy == pytest.approx(1.0)


def test_distance_warns_on_clamp(grid1):
    phi = _oracle(grid1, 0.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert distance(phi, grid1) == 0.0
