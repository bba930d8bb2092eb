"""Uniform lattice on the space-time cylinder T^d x [0, 1].

Spatial fields are numpy arrays of shape ``(n,) * d``; space-time fields
have shape ``(nt,) + (n,) * d`` (time-major, so ``phi[j]`` is the slice at
``t_j``).  Flattening in C order gives the documented lexicographic node
order used by the field file format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class TorusGrid:
    dim: int
    n: int
    nt: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 4:
            raise ConfigurationError(f"n must be >= 4, got {self.n}")
        if self.nt < 3:
            raise ConfigurationError(f"nt must be >= 3, got {self.nt}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def dt(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def spatial_shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def shape(self) -> tuple:
        return (self.nt,) + self.spatial_shape

    @property
    def num_spatial(self) -> int:
        return self.n**self.dim

    @cached_property
    def t(self) -> np.ndarray:
        # j / (nt-1) rather than j * dt so that t[-1] == 1.0 exactly
        return np.arange(self.nt) / (self.nt - 1)

    @cached_property
    def x(self) -> tuple:
        """Nodal coordinates, one array of ``spatial_shape`` per axis."""
        axis = np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    def t_field(self) -> np.ndarray:
        """t broadcast to a space-time field."""
        return np.broadcast_to(
            self.t.reshape((self.nt,) + (1,) * self.dim), self.shape
        ).copy()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def spatial_zeros(self) -> np.ndarray:
        return np.zeros(self.spatial_shape)

    def check_spatial(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.spatial_shape:
            raise ConfigurationError(
                f"spatial field has shape {f.shape}, grid expects {self.spatial_shape}"
            )
        return f

    def check_spacetime(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != self.shape:
            raise ConfigurationError(
                f"space-time field has shape {phi.shape}, grid expects {self.shape}"
            )
        return phi


def make_grid(d: int, n: int, nt: int) -> TorusGrid:
    for name, val in (("d", d), ("n", n), ("nt", nt)):
        if int(val) != val:
            raise ConfigurationError(f"{name} must be an integer, got {val!r}")
    return TorusGrid(int(d), int(n), int(nt))


def integrate_spatial(f, grid: TorusGrid) -> float:
    """Periodic rectangle rule h^d * sum(f).

    The nodal sum is correctly rounded (``math.fsum``), so the result does
    not depend on summation order: cyclic shifts integrate bit-identically.
    """
    f = grid.check_spatial(f)
    return math.fsum(f.ravel()) * grid.h**grid.dim


def integrate_spatial_slices(phi, grid: TorusGrid) -> np.ndarray:
    """Spatial quadrature of every time slice of a (partial) space-time field."""
    phi = np.asarray(phi, dtype=float)
    w = grid.h**grid.dim
    return np.array([math.fsum(row) * w for row in phi.reshape(phi.shape[0], -1)])


def normalize(f, grid: TorusGrid) -> np.ndarray:
    f = grid.check_spatial(f)
    return f - integrate_spatial(f, grid)


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    """End points (phi0, phi1) of a path in H.

    Construction validates admissibility ``1 + lap(phi_i) >= margin``.
    """

    phi0: np.ndarray
    phi1: np.ndarray
    grid: TorusGrid
    margin: float = 1e-8

    def __post_init__(self):
        from .operators import laplacian

        p0 = self.grid.check_spatial(self.phi0).copy()
        p1 = self.grid.check_spatial(self.phi1).copy()
        if not (np.all(np.isfinite(p0)) and np.all(np.isfinite(p1))):
            raise DomainError("boundary fields must be finite")
        for name, p in (("phi0", p0), ("phi1", p1)):
            worst = float(np.min(1.0 + laplacian(p, self.grid)))
            if worst < self.margin:
                raise DomainError(
                    f"{name} is not admissible: min(1 + lap) = {worst:.6g} < {self.margin:g}"
                )
        p0.flags.writeable = False
        p1.flags.writeable = False
        object.__setattr__(self, "phi0", p0)
        object.__setattr__(self, "phi1", p1)

    def linear_path(self) -> np.ndarray:
        """(1 - t) phi0 + t phi1 with the end slices copied bit for bit."""
        t = self.grid.t.reshape((self.grid.nt,) + (1,) * self.grid.dim)
        phi = (1.0 - t) * self.phi0 + t * self.phi1
        phi[0] = self.phi0
        phi[-1] = self.phi1
        return phi

    def shifted(self, c: float) -> "BoundaryPair":
        return BoundaryPair(self.phi0 + c, self.phi1 + c, self.grid, self.margin)


def trig_field(grid: TorusGrid, modes) -> np.ndarray:
    """Sum of ``amp * cos(2 pi k.x + phase)`` over ``modes = [(k, amp, phase), ...]``."""
    f = grid.spatial_zeros()
    for k, amp, phase in modes:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.shape != (grid.dim,):
            raise ConfigurationError(f"wave vector {tuple(k)} does not match dim {grid.dim}")
        arg = sum(2.0 * np.pi * kk * xx for kk, xx in zip(k, grid.x))
        f += amp * np.cos(arg + phase)
    return f


def laplacian_bound(modes) -> float:
    """Continuum bound sum |a| (2 pi |k|)^2 >= sup|lap phi| for a trig field.

    It also dominates the discrete Laplacian since the 3-point symbol
    (4/h^2) sin^2(pi k h) never exceeds (2 pi k)^2.
    """
    total = 0.0
    for k, amp, _ in modes:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        total += abs(amp) * (2.0 * np.pi) ** 2 * float(np.dot(k, k))
    return total


def random_trig_modes(grid: TorusGrid, rng: np.random.Generator, num_modes=3,
                      lap_bound=0.5, kmax=None):
    """Random band-limited modes with |k| <= n/4 scaled so sup|lap| <= lap_bound."""
    if kmax is None:
        kmax = grid.n / 4
    ki = int(np.floor(kmax))
    modes = []
    while len(modes) < num_modes:
        k = rng.integers(-ki, ki + 1, size=grid.dim)
        if not np.any(k) or np.linalg.norm(k) > kmax:
            continue
        modes.append((k, rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * np.pi)))
    scale = lap_bound / laplacian_bound(modes)
    return [(k, a * scale, p) for k, a, p in modes]


def random_admissible_field(grid: TorusGrid, rng: np.random.Generator, num_modes=3,
                            lap_bound=0.5, kmax=None) -> np.ndarray:
    return trig_field(grid, random_trig_modes(grid, rng, num_modes, lap_bound, kmax))


def sawtooth_modes(num_modes: int, strength: float, shift: float = 0.0, axis: int = 0,
                   dim: int = 1):
    """Fejer-smoothed sawtooth along one axis.

    lap phi = strength * (F_K - 1) with F_K the (non-negative) Fejer kernel,
    so 1 + lap phi >= 1 - strength in the continuum while grad phi spans
    roughly [-strength/2, strength/2].  ``shift`` translates the profile.
    """
    if not 0 <= strength < 1:
        raise ConfigurationError("sawtooth strength must lie in [0, 1)")
    modes = []
    for k in range(1, num_modes + 1):
        kv = np.zeros(dim)
        kv[axis] = k
        amp = -strength * (1 - k / (num_modes + 1)) / (2 * np.pi**2 * k**2)
        modes.append((kv, amp, 2 * np.pi * k * shift))
    return modes
