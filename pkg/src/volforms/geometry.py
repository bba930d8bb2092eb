"""Riemannian quantities on H = {phi : 1 + lap phi > 0} over the flat torus."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import TorusGrid, integrate_spatial, integrate_spatial_slices
from .operators import central_diff, gradient, laplacian, time_derivative

CLAMP_ABORT = 1e-8


class ClampWarning(RuntimeWarning):
    """Slightly negative energy elements were clamped at zero."""


def _density(phi, grid, guard=0.0, what="point"):
    rho = 1.0 + laplacian(phi, grid)
    worst = float(rho.min())
    if worst <= guard:
        raise DomainError(f"{what} is not admissible: min(1 + lap) = {worst:.6g}")
    return rho


def metric_pairing(phi, u, v, grid: TorusGrid) -> float:
    """<u, v>_phi = int u v (1 + lap phi)."""
    rho = _density(grid.check_spatial(phi), grid)
    return integrate_spatial(grid.check_spatial(u) * grid.check_spatial(v) * rho, grid)


def time_weights(grid: TorusGrid) -> tuple:
    """Composite Simpson weights in t when nt-1 is even, trapezoid otherwise."""
    m, dt = grid.nt - 1, grid.dt
    w = np.full(grid.nt, dt)
    if m % 2 == 0:
        w[1:-1:2] = 4 * dt / 3
        w[2:-1:2] = 2 * dt / 3
        w[0] = w[-1] = dt / 3
        return w, "simpson"
    w[0] = w[-1] = dt / 2
    return w, "trapezoid"


def energy_elements(phi, grid: TorusGrid) -> np.ndarray:
    """E(t_j) = int Phi_t^2 (1 + lap Phi) at every time node (one-sided Phi_t at the ends)."""
    phi = grid.check_spacetime(phi)
    phi_t = time_derivative(phi, grid)
    return integrate_spatial_slices(phi_t**2 * (1.0 + laplacian(phi, grid)), grid)


def energy_element(phi, j: int, grid: TorusGrid) -> float:
    if not 0 <= j < grid.nt:
        raise IndexError(f"time index {j} outside 0..{grid.nt - 1}")
    return float(energy_elements(phi, grid)[j])


def energy(phi, grid: TorusGrid) -> float:
    """Path energy 1/2 int_0^1 E(t) dt."""
    w, _ = time_weights(grid)
    return 0.5 * float(np.dot(w, energy_elements(phi, grid)))


def clamp_elements(e):
    """Clamp rounding-level negatives at 0; return (clamped, count)."""
    e = np.asarray(e, dtype=float)
    neg = e < 0
    count = int(neg.sum())
    if count:
        scale = max(float(np.abs(e).max()), np.finfo(float).tiny)
        if float(-e[neg].min()) > CLAMP_ABORT * scale:
            raise DomainError(f"energy element {e[neg].min():.3e} is negative beyond rounding")
        e = np.where(neg, 0.0, e)
    return e, count


def distance(phi, grid: TorusGrid) -> float:
    """Length int_0^1 sqrt(E(t)) dt of the path phi."""
    e, count = clamp_elements(energy_elements(phi, grid))
    if count:
        warnings.warn(f"{count} negative energy elements clamped at 0", ClampWarning,
                      stacklevel=2)
    w, _ = time_weights(grid)
    return float(np.dot(w, np.sqrt(e)))


def covariant_derivative(phi, psi, grid: TorusGrid, guard: float = 0.0) -> np.ndarray:
    """D_t psi = psi_t + (W, grad psi) with W = -grad Phi_t / (1 + lap Phi).

    Both ``phi`` and ``psi`` are full space-time fields; the result is
    defined at every time node (one-sided time differences at the ends).
    """
    phi = grid.check_spacetime(phi)
    psi = grid.check_spacetime(psi)
    rho = _density(phi, grid, guard, "path")
    phi_t = time_derivative(phi, grid)
    out = time_derivative(psi, grid)
    for k in range(grid.dim):
        out -= central_diff(phi_t, grid, k) * central_diff(psi, grid, k) / rho
    return out


# --- curvature ----------------------------------------------------------------

def _cell_gradient(f, grid):
    """Gradient at cell centres: edge differences averaged over the cell.

    For axis k this is (f(x + h e_k) - f(x)) / h averaged over the 2^(d-1)
    edges of the cell parallel to e_k, i.e. a central difference about the
    cell centre x + (h/2)(1,...,1).
    """
    out = []
    for k in range(grid.dim):
        g = (np.roll(f, -1, axis=k) - f) / grid.h
        for ax in range(grid.dim):
            if ax != k:
                g = 0.5 * (g + np.roll(g, -1, axis=ax))
        out.append(g)
    return out


def _cell_average(f, grid):
    for ax in range(grid.dim):
        f = 0.5 * (f + np.roll(f, -1, axis=ax))
    return f


def sectional_curvature(phi, alpha, beta, grid: TorusGrid) -> float:
    """K = -int (1 / (1 + lap phi)) sum_{i<j} (alpha_i beta_j - alpha_j beta_i)^2.

    Gradients and the density are evaluated at cell centres, so the
    integrand is a non-positive multiple of a sum of squares node by node.
    """
    phi = grid.check_spatial(phi)
    rho = _cell_average(_density(phi, grid), grid)
    if grid.dim == 1:
        return 0.0
    ga = _cell_gradient(grid.check_spatial(alpha), grid)
    gb = _cell_gradient(grid.check_spatial(beta), grid)
    wedge2 = sum((ga[i] * gb[j] - ga[j] * gb[i]) ** 2
                 for i, j in itertools.combinations(range(grid.dim), 2))
    return -integrate_spatial(wedge2 / rho, grid)


def curvature_field_2d(phi, alpha, beta, psi, grid: TorusGrid) -> np.ndarray:
    """R_{alpha,beta}(psi) = (nu, grad psi), nu = rho^-1 curl(rho^-1 grad alpha x grad beta).

    The planar curl of a scalar g is (d_2 g, -d_1 g); node-centred central
    differences throughout.
    """
    if grid.dim != 2:
        raise ConfigurationError("the curvature operator is implemented for d = 2 only")
    rho = _density(grid.check_spatial(phi), grid)
    a1, a2 = gradient(alpha, grid)
    b1, b2 = gradient(beta, grid)
    g = (a1 * b2 - a2 * b1) / rho
    nu1 = central_diff(g, grid, 1) / rho
    nu2 = -central_diff(g, grid, 0) / rho
    p1, p2 = gradient(psi, grid)
    return nu1 * p1 + nu2 * p2


def curvature_operator_2d(phi, alpha, beta, grid: TorusGrid) -> float:
    """<R_{alpha,beta}(alpha), beta>_phi."""
    r = curvature_field_2d(phi, alpha, beta, alpha, grid)
    return metric_pairing(phi, r, beta, grid)


# --- two-parameter families ---------------------------------------------------

@dataclass
class GeodesicFamily:
    """Solutions Phi(., t, s) on a uniform s-grid; ``phis[i]`` is the path at s_values[i]."""

    phis: np.ndarray
    s_values: np.ndarray
    epsilon: float
    grid: TorusGrid
    description: str = ""

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=float)
        self.s_values = np.asarray(self.s_values, dtype=float)
        if self.phis.shape[1:] != self.grid.shape or len(self.s_values) != len(self.phis):
            raise ConfigurationError("family arrays do not match the grid / s-grid")

    @property
    def ds(self) -> float:
        return float(self.s_values[1] - self.s_values[0])

    def reversed_in_time(self) -> "GeodesicFamily":
        return GeodesicFamily(self.phis[:, ::-1].copy(), self.s_values, self.epsilon,
                              self.grid, self.description + " (time reversed)")

    def phi_s(self) -> np.ndarray:
        """Deformation field Y = Phi_s: central in s, one-sided second order at the ends."""
        if len(self.s_values) < 3:
            raise ConfigurationError("need at least 3 s-samples for Phi_s")
        p, ds = self.phis, self.ds
        y = np.empty_like(p)
        y[1:-1] = (p[2:] - p[:-2]) / (2 * ds)
        y[0] = (-3 * p[0] + 4 * p[1] - p[2]) / (2 * ds)
        y[-1] = (3 * p[-1] - 4 * p[-2] + p[-3]) / (2 * ds)
        return y


def jacobi_norms(fam: GeodesicFamily, si: int) -> np.ndarray:
    """|Y(t_j)| for every time node along member ``si``."""
    y = fam.phi_s()[si]
    phi = fam.phis[si]
    rho = 1.0 + laplacian(phi, fam.grid)
    sq = integrate_spatial_slices(y**2 * rho, fam.grid)
    return np.sqrt(clamp_elements(sq)[0])


def jacobi_norm(fam: GeodesicFamily, si: int, tj: int) -> float:
    if not 0 <= tj < fam.grid.nt:
        raise IndexError(f"time index {tj} outside 0..{fam.grid.nt - 1}")
    return float(jacobi_norms(fam, si)[tj])


def jacobi_growth(fam: GeodesicFamily, si: int, tj: int) -> tuple:
    """(<Y, D_X Y>, <Y, Y>) at time node tj of member si."""
    y = fam.phi_s()[si]
    phi = fam.phis[si]
    dy = covariant_derivative(phi, y, fam.grid)
    rho = 1.0 + laplacian(phi[tj], fam.grid)
    return (integrate_spatial(y[tj] * dy[tj] * rho, fam.grid),
            integrate_spatial(y[tj] ** 2 * rho, fam.grid))
