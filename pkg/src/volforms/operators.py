"""Finite-difference operators on the torus cylinder and the nonlinear
operators of the perturbed geodesic equation.

Stencils (time index j, spatial multi-index x, unit vectors e_k):

* ``lap f(x)   = sum_k (f(x+h e_k) - 2 f(x) + f(x-h e_k)) / h^2`` (periodic)
* ``Phi_t(j)   = (Phi(j+1) - Phi(j-1)) / (2 dt)``; one-sided 3-point at j=0, nt-1
* ``Phi_tt(j)  = (Phi(j+1) - 2 Phi(j) + Phi(j-1)) / dt^2``, interior j only
* ``Phi_tk(j)  = (D_k Phi(j+1) - D_k Phi(j-1)) / (2 dt)`` with the central
  spatial difference ``D_k f = (f(x+h e_k) - f(x-h e_k)) / (2h)``

Everything that involves Phi_tt or Phi_tk lives on the interior time nodes
``1..nt-2`` and is returned as an array of shape ``(nt-2,) + (n,)*d``.
Flat torus: no Ricci or Weitzenboeck correction terms appear.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .grid import TorusGrid


def _spatial_axes(f, grid):
    return range(f.ndim - grid.dim, f.ndim)


def laplacian(f, grid: TorusGrid) -> np.ndarray:
    """Periodic 3-point Laplacian per axis; accepts spatial or space-time fields."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for ax in _spatial_axes(f, grid):
        out += np.roll(f, -1, axis=ax) + np.roll(f, 1, axis=ax)
    out -= 2 * grid.dim * f
    return out / grid.h**2


def central_diff(f, grid: TorusGrid, k: int) -> np.ndarray:
    """Central difference along spatial axis k (0-based)."""
    f = np.asarray(f, dtype=float)
    ax = f.ndim - grid.dim + k
    return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * grid.h)


def gradient(f, grid: TorusGrid) -> list:
    return [central_diff(f, grid, k) for k in range(grid.dim)]


def time_derivative(phi, grid: TorusGrid) -> np.ndarray:
    """First time derivative at every time node, one-sided second order at the ends."""
    phi = np.asarray(phi, dtype=float)
    dt = grid.dt
    out = np.empty_like(phi)
    out[1:-1] = (phi[2:] - phi[:-2]) / (2 * dt)
    out[0] = (-3 * phi[0] + 4 * phi[1] - phi[2]) / (2 * dt)
    out[-1] = (3 * phi[-1] - 4 * phi[-2] + phi[-3]) / (2 * dt)
    return out


class TimeDerivatives(NamedTuple):
    phi_t: np.ndarray  # all nt slices
    phi_tt: np.ndarray  # interior slices
    phi_tk: list  # interior slices, one array per spatial axis


def time_derivatives(phi, grid: TorusGrid) -> TimeDerivatives:
    phi = grid.check_spacetime(phi)
    dt = grid.dt
    phi_tt = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / dt**2
    phi_tk = [(central_diff(phi[2:], grid, k) - central_diff(phi[:-2], grid, k)) / (2 * dt)
              for k in range(grid.dim)]
    return TimeDerivatives(time_derivative(phi, grid), phi_tt, phi_tk)


def _second_order_parts(phi, grid):
    td = time_derivatives(phi, grid)
    lap = laplacian(phi[1:-1], grid)
    return td.phi_tt, lap, td.phi_tk


def q_op(phi, grid: TorusGrid) -> np.ndarray:
    """Phi_tt (1 + lap Phi) - |grad Phi_t|^2 on interior nodes."""
    phi_tt, lap, phi_tk = _second_order_parts(phi, grid)
    return phi_tt * (1.0 + lap) - sum(c * c for c in phi_tk)


def q_remainder(h, grid: TorusGrid) -> np.ndarray:
    """Purely quadratic part h_tt lap h - |grad h_t|^2.

    p_op(s, Phi + h) = p_op(s, Phi) + dp_apply(s, Phi, h) + s * q_remainder(h)
    holds exactly for the discrete operators.
    """
    h_tt, lap, h_tk = _second_order_parts(h, grid)
    return h_tt * lap - sum(c * c for c in h_tk)


def p_op(s: float, phi, grid: TorusGrid) -> np.ndarray:
    """s Q(Phi) + (1 - s)(Phi_tt + lap Phi) on interior nodes."""
    phi_tt, lap, phi_tk = _second_order_parts(phi, grid)
    q = phi_tt * (1.0 + lap) - sum(c * c for c in phi_tk)
    return s * q + (1.0 - s) * (phi_tt + lap)


class OperatorCoefficients(NamedTuple):
    a: np.ndarray  # multiplies lap h
    b: np.ndarray  # multiplies h_tt
    c: list  # c_k multiplies -2 h_tk


def coefficients(s: float, phi, grid: TorusGrid) -> OperatorCoefficients:
    phi_tt, lap, phi_tk = _second_order_parts(phi, grid)
    a = s * phi_tt + (1.0 - s)
    b = s * (1.0 + lap) + (1.0 - s)
    return OperatorCoefficients(a, b, [s * c for c in phi_tk])


def dp_apply(s: float, phi, h, grid: TorusGrid, coeffs: OperatorCoefficients | None = None):
    """Linearization a lap h + b h_tt - 2 sum_k c_k h_tk (matrix-free).

    ``h`` is a full space-time field; the increment is meant to vanish on
    the end slices, and the caller is responsible for that.
    """
    if coeffs is None:
        coeffs = coefficients(s, phi, grid)
    h_tt, lap, h_tk = _second_order_parts(grid.check_spacetime(h), grid)
    out = coeffs.a * lap + coeffs.b * h_tt
    for ck, hk in zip(coeffs.c, h_tk):
        out -= 2.0 * ck * hk
    return out


class Margins(NamedTuple):
    min_a: float
    min_b: float
    min_trace: float  # min(Phi_tt + 1 + lap Phi)

    def min(self) -> float:
        return min(self)


def ellipticity_margins(s: float, phi, grid: TorusGrid) -> Margins:
    phi_tt, lap, _ = _second_order_parts(phi, grid)
    a = s * phi_tt + (1.0 - s)
    b = s * (1.0 + lap) + (1.0 - s)
    return Margins(float(a.min()), float(b.min()), float((phi_tt + 1.0 + lap).min()))


def determinant_defect(s: float, eps: float, phi, grid: TorusGrid) -> np.ndarray:
    """a b - sum c_k^2 - (s eps + 1 - s), nodally.

    Expanding gives a b - |c|^2 = s P(s, Phi) + (1 - s), so the defect equals
    s times the residual P - eps and vanishes on exact solutions.
    """
    co = coefficients(s, phi, grid)
    return co.a * co.b - sum(c * c for c in co.c) - (s * eps + 1.0 - s)


# --- explicit sparse matrix of dp_apply (interior unknowns only) ---------------

def _periodic_1d(n, h, second):
    e = np.ones(n)
    if second:
        m = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
        m[0, n - 1] = 1.0
        m[n - 1, 0] = 1.0
        return sp.csr_matrix(m) / h**2
    m = sp.diags([-e[:-1], e[:-1]], [-1, 1], shape=(n, n), format="lil")
    m[0, n - 1] = -1.0
    m[n - 1, 0] = 1.0
    return sp.csr_matrix(m) / (2 * h)


def _kron_axis(op, k, dim, n):
    mats = [sp.identity(n, format="csr")] * dim
    mats[k] = op
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


@lru_cache(maxsize=16)
def _stencil_matrices(grid: TorusGrid):
    n, dim, m = grid.n, grid.dim, grid.nt - 2
    lap_1d = _periodic_1d(n, grid.h, second=True)
    d_1d = _periodic_1d(n, grid.h, second=False)
    lap = sum(_kron_axis(lap_1d, k, dim, n) for k in range(dim))
    grads = [_kron_axis(d_1d, k, dim, n) for k in range(dim)]
    e = np.ones(m)
    tt = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(m, m), format="csr") / grid.dt**2
    t1 = sp.diags([-e[:-1], e[:-1]], [-1, 1], shape=(m, m), format="csr") / (2 * grid.dt)
    ident_t = sp.identity(m, format="csr")
    ident_x = sp.identity(grid.num_spatial, format="csr")
    lap_st = sp.kron(ident_t, lap, format="csr")
    dtt = sp.kron(tt, ident_x, format="csr")
    dtk = [sp.kron(t1, g, format="csr") for g in grads]
    return lap_st, dtt, dtk


def dp_matrix(s: float, phi, grid: TorusGrid, coeffs: OperatorCoefficients | None = None):
    """Sparse matrix of dp_apply acting on the interior nodes (Dirichlet ends).

    Rows and columns follow the C-order flattening of ``phi[1:-1]``.
    """
    if coeffs is None:
        coeffs = coefficients(s, phi, grid)
    lap_st, dtt, dtk = _stencil_matrices(grid)
    mat = sp.diags(coeffs.a.ravel()) @ lap_st + sp.diags(coeffs.b.ravel()) @ dtt
    for ck, d in zip(coeffs.c, dtk):
        mat = mat - 2.0 * (sp.diags(ck.ravel()) @ d)
    return mat.tocsc()


# --- algebraic forms ----------------------------------------------------------

def matrix_q(A) -> float | np.ndarray:
    """A_00 sum_{i>=1} A_ii - sum_{i>=1} A_i0^2; batched over leading axes."""
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != A.shape[-2] or A.shape[-1] < 2:
        raise ValueError(f"expected square matrices of size >= 2, got {A.shape}")
    diag = np.trace(A[..., 1:, 1:], axis1=-2, axis2=-1)
    val = A[..., 0, 0] * diag - np.sum(A[..., 1:, 0] ** 2, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def log_q(x: float, y: float, z) -> float:
    """log(x y - |z|^2) on the cone x > 0, y > 0, x y > |z|^2."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    det = x * y - float(np.dot(z, z))
    if not (x > 0 and y > 0 and det > 0):
        raise DomainError(f"log_q undefined at x={x!r}, y={y!r}, xy-|z|^2={det!r}")
    return float(np.log(det))


def log_q_batch(x, y, z) -> np.ndarray:
    """Vectorized log_q; ``z`` has shape (..., m).  No domain check."""
    return np.log(x * y - np.sum(np.asarray(z) ** 2, axis=-1))
