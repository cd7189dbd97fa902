"""Forward and linearized Schrödinger problems on the truncated waveguide.

Crank–Nicolson in time, five-point Laplacian in space.  Dirichlet data is
prescribed on the lateral boundary ``x' in {a, b}``; the axial truncation
ends carry homogeneous Dirichlet conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .domain import (BoundaryTrace, ComplexField, SpaceTimeGrid, d1, d2, spatial_l2_norm)

# max|Re v(0)| allowed relative to max|v(0)| before time symmetrization
IMAG_TOL = 1e-8
# allowed mismatch between g(0) and u0 on the lateral boundary
COMPAT_TOL = 1e-8


class SolverError(RuntimeError):
    pass


class AdmissibilityError(ValueError):
    pass


class SymmetrizationError(ValueError):
    pass


def w2inf_surrogate(values: np.ndarray, grid: SpaceTimeGrid) -> float:
    """``max(sup|q|, sup|Dq|, sup|D^2 q|)`` by finite differences."""
    hx, hn = grid.h_xprime, grid.h_axial
    qx, qn = d1(values, hx, 0), d1(values, hn, 1)
    parts = [values, qx, qn, d2(values, hx, 0), d2(values, hn, 1), d1(qx, hn, 1)]
    return float(max(np.max(np.abs(a)) for a in parts))


@dataclass(frozen=True)
class Potential:
    values: np.ndarray
    p: np.ndarray
    M: float
    ell: float

    def __post_init__(self):
        for name in ("values", "p"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def norm(self, grid: SpaceTimeGrid) -> float:
        return w2inf_surrogate(self.values, grid)

    def check(self, grid: SpaceTimeGrid, tol: float = 1e-12) -> None:
        if self.norm(grid) > self.M * (1 + 1e-12):
            raise AdmissibilityError(f"W2,inf surrogate {self.norm(grid):.4g} exceeds M = {self.M}")
        lat = self.values[[0, -1], :] - self.p[[0, -1], :]
        if np.max(np.abs(lat)) > tol * max(1.0, np.max(np.abs(self.p))):
            raise AdmissibilityError("q differs from p on the lateral boundary")


def check_pair(q1: Potential, q2: Potential, grid: SpaceTimeGrid) -> None:
    if not (np.array_equal(q1.p, q2.p) and q1.M == q2.M and q1.ell == q2.ell):
        raise AdmissibilityError("pair does not share (p, M, ell)")
    q1.check(grid)
    q2.check(grid)
    outside = np.abs(grid.xn) >= q1.ell
    if np.any(q1.values[:, outside] != q2.values[:, outside]):
        raise AdmissibilityError("q1 - q2 is not supported in |x_n| < ell")


@dataclass(frozen=True)
class InitialState:
    u0: np.ndarray
    alpha: float
    ell: float

    def __post_init__(self):
        a = np.array(self.u0)
        if np.iscomplexobj(a) and np.any(a.imag != 0):
            a = a.astype(complex)
        else:
            a = a.real.astype(float)
        a.setflags(write=False)
        object.__setattr__(self, "u0", a)

    def check(self, grid: SpaceTimeGrid) -> None:
        band = np.abs(grid.xn) < self.ell
        if np.min(self.u0.real[:, band]) < self.alpha - 1e-12:
            raise AdmissibilityError("u0 drops below alpha on omega x (-ell, ell)")


def potential_from(values, grid: SpaceTimeGrid, p=None, M: float = np.inf, ell: float = 1.0):
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.spatial_shape)
    p = values if p is None else np.broadcast_to(np.asarray(p, dtype=float), grid.spatial_shape)
    return Potential(values, p, M, ell)


# --------------------------------------------------------------------------
# boundary data


def _boundary_laplacian(u0: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    lap = d2(u0, grid.h_xprime, 0) + d2(u0, grid.h_axial, 1)
    return lap[[0, -1], :]


def boundary_data_G(u0: InitialState, p, grid: SpaceTimeGrid) -> BoundaryTrace:
    """``g(t) = u0 + i t (Lap - p) u0`` on the lateral boundary."""
    p = np.broadcast_to(np.asarray(p, dtype=float), grid.spatial_shape)
    base = u0.u0[[0, -1], :]
    slope = _boundary_laplacian(u0.u0, grid) - p[[0, -1], :] * base
    t = grid.half().t if grid.symmetric_time else grid.t
    vals = base[None] + 1j * t[:, None, None] * slope[None]
    g = grid.half() if grid.symmetric_time else grid
    return BoundaryTrace(g, (0, grid.n_xprime - 1), vals)


def boundary_data_Gprime(u0: InitialState, p, grid: SpaceTimeGrid) -> BoundaryTrace:
    """Exact time derivative of :func:`boundary_data_G`, constant in time."""
    p = np.broadcast_to(np.asarray(p, dtype=float), grid.spatial_shape)
    slope = _boundary_laplacian(u0.u0, grid) - p[[0, -1], :] * u0.u0[[0, -1], :]
    g = grid.half() if grid.symmetric_time else grid
    vals = np.broadcast_to(1j * slope[None], (g.n_time,) + slope.shape)
    return BoundaryTrace(g, (0, grid.n_xprime - 1), vals)


# --------------------------------------------------------------------------
# discrete operators


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    """Rows for interior nodes only; boundary rows are empty."""
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    D = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="lil")
    D[0, :] = 0
    D[n - 1, :] = 0
    return (D.tocsr() / (h * h))


@dataclass
class _Layout:
    grid: SpaceTimeGrid
    interior: np.ndarray
    boundary: np.ndarray
    lap_II: sp.csr_matrix
    lap_IB: sp.csr_matrix


_layout_cache: dict = {}


def _layout(grid: SpaceTimeGrid) -> _Layout:
    key = (grid.omega, grid.X, grid.n_xprime, grid.n_axial)
    if key in _layout_cache:
        return _layout_cache[key]
    nx, nn = grid.n_xprime, grid.n_axial
    Dx = _second_difference(nx, grid.h_xprime)
    Dn = _second_difference(nn, grid.h_axial)
    lap = (sp.kron(Dx, sp.identity(nn)) + sp.kron(sp.identity(nx), Dn)).tocsr()
    mask = np.zeros((nx, nn), dtype=bool)
    mask[1:-1, 1:-1] = True
    flat = mask.ravel()
    interior = np.flatnonzero(flat)
    boundary = np.flatnonzero(~flat)
    lay = _Layout(grid, interior, boundary, lap[interior][:, interior].tocsc(),
                  lap[interior][:, boundary].tocsr())
    _layout_cache[key] = lay
    return lay


def discrete_laplacian(u: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Five-point Laplacian at interior nodes (zero on the boundary)."""
    lay = _layout(grid)
    full = u.reshape(u.shape[:-2] + (-1,))
    out = np.zeros_like(full, dtype=np.result_type(u, float))
    out[..., lay.interior] = (lay.lap_II @ full[..., lay.interior].T).T \
        + (lay.lap_IB @ full[..., lay.boundary].T).T
    return out.reshape(u.shape)


class CrankNicolson:
    """Crank–Nicolson propagator for ``i u' = -Lap u + q u``.

    The sparse LU factorization of ``I + i dt/2 H`` is built once and reused
    for every step.
    """

    def __init__(self, q: np.ndarray, grid: SpaceTimeGrid, dt: float):
        self.grid = grid
        self.dt = dt
        lay = _layout(grid)
        self.lay = lay
        qI = np.asarray(q, dtype=float).ravel()[lay.interior]
        H = (-lay.lap_II + sp.diags(qI)).tocsc()
        eye = sp.identity(H.shape[0], format="csc")
        self.H = H
        self.A = (eye + 0.5j * dt * H).tocsc()
        self.B = (eye - 0.5j * dt * H).tocsr()
        self.H_IB = -lay.lap_IB
        try:
            self.lu = splu(self.A)
        except RuntimeError as exc:  # singular factorization
            raise SolverError(f"sparse factorization failed: {exc}") from exc

    def boundary_vector(self, lateral: np.ndarray) -> np.ndarray:
        nx, nn = self.grid.spatial_shape
        full = np.zeros((nx, nn), dtype=complex)
        full[0, :] = lateral[0]
        full[-1, :] = lateral[1]
        full[:, 0] = 0.0
        full[:, -1] = 0.0
        return full.ravel()[self.lay.boundary]

    def step(self, uI: np.ndarray, bnd_now: np.ndarray, bnd_next: np.ndarray) -> np.ndarray:
        rhs = self.B @ uI - 0.5j * self.dt * (self.H_IB @ (bnd_now + bnd_next))
        out = self.lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SolverError("linear solve produced non-finite values")
        return out


def _solve(q: np.ndarray, init: np.ndarray, lateral: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """March ``init`` through the time nodes of ``grid`` (a ``[0, T]`` grid)."""
    nx, nn = grid.spatial_shape
    cn = CrankNicolson(q, grid, grid.dt)
    lay = cn.lay
    out = np.empty(grid.shape, dtype=complex)
    bnd = [cn.boundary_vector(lateral[k]) for k in range(grid.n_time)]
    full0 = np.array(init, dtype=complex).ravel()
    full0[lay.boundary] = bnd[0]
    out[0] = full0.reshape(nx, nn)
    uI = full0[lay.interior]
    for k in range(grid.n_time - 1):
        uI = cn.step(uI, bnd[k], bnd[k + 1])
        full = np.empty(nx * nn, dtype=complex)
        full[lay.interior] = uI
        full[lay.boundary] = bnd[k + 1]
        out[k + 1] = full.reshape(nx, nn)
    return out


def _march_grid(grid: SpaceTimeGrid) -> SpaceTimeGrid:
    g = grid.half() if grid.symmetric_time else grid
    if g.t[0] != 0.0:
        raise SolverError("time marching needs a grid starting at t = 0")
    return g


def _lateral_values(g, grid: SpaceTimeGrid) -> np.ndarray:
    vals = g.values if isinstance(g, BoundaryTrace) else np.asarray(g)
    if vals.shape != (grid.n_time, 2, grid.n_axial):
        raise SolverError(f"boundary data has shape {vals.shape}, "
                          f"expected {(grid.n_time, 2, grid.n_axial)}")
    return vals


def solve_schrodinger(q: Potential, u0: InitialState, g, grid: SpaceTimeGrid) -> ComplexField:
    """Solve ``-i u' - Lap u + q u = 0``, ``u(0) = u0``, ``u = g`` on the lateral boundary.

    A symmetric grid is marched on its nonnegative half and the result lives
    on ``grid.half()``.
    """
    mg = _march_grid(grid)
    lat = _lateral_values(g, mg)
    init = np.asarray(u0.u0)
    scale = max(1.0, float(np.max(np.abs(init))))
    if np.max(np.abs(lat[0] - init[[0, -1], :])) > COMPAT_TOL * scale:
        raise SolverError("boundary data g(0) does not match u0 on the lateral boundary")
    return ComplexField(mg, _solve(q.values, init, lat, mg))


def derivative_initial_state(q: Potential, u0: InitialState, grid: SpaceTimeGrid,
                             p=None) -> np.ndarray:
    """``i (Lap - q) u0``: five-point Laplacian inside, boundary stencils on the boundary."""
    lap = discrete_laplacian(np.asarray(u0.u0), grid)
    out = 1j * (lap - q.values * u0.u0)
    pb = q.p if p is None else np.broadcast_to(p, grid.spatial_shape)
    out[[0, -1], :] = 1j * (_boundary_laplacian(u0.u0, grid) - pb[[0, -1], :] * u0.u0[[0, -1], :])
    return out


def solve_derivative(q: Potential, u0: InitialState, gprime, grid: SpaceTimeGrid) -> ComplexField:
    """Solve the time-differentiated problem for ``u'``.

    Initial state ``i (Lap - q) u0`` and lateral data ``g' = i (Lap - p) u0``.
    """
    mg = _march_grid(grid)
    lat = _lateral_values(gprime, mg)
    init = derivative_initial_state(q, u0, mg)
    init[[0, -1], :] = lat[0]
    return ComplexField(mg, _solve(q.values, init, lat, mg))


@dataclass(frozen=True)
class DifferenceSystem:
    u: ComplexField
    v: ComplexField
    fprime: ComplexField
    u1: ComplexField
    u2: ComplexField
    u1p: ComplexField
    u2p: ComplexField


def difference_system(q1: Potential, q2: Potential, u0: InitialState,
                      grid: SpaceTimeGrid) -> DifferenceSystem:
    """``u = u1 - u2``, ``v = u1' - u2'`` and the source ``f' = (q2 - q1) u2'``."""
    mg = _march_grid(grid)
    check_pair(q1, q2, mg)
    g = boundary_data_G(u0, q1.p, grid)
    gp = boundary_data_Gprime(u0, q1.p, grid)
    u1 = solve_schrodinger(q1, u0, g, grid)
    u2 = solve_schrodinger(q2, u0, g, grid)
    u1p = solve_derivative(q1, u0, gp, grid)
    u2p = solve_derivative(q2, u0, gp, grid)
    fprime = ComplexField(mg, (q2.values - q1.values)[None] * u2p.values)
    return DifferenceSystem(u1 - u2, u1p - u2p, fprime, u1, u2, u1p, u2p)


def closure_discrepancy(u: ComplexField, q1: Potential, q2: Potential, u0: InitialState) -> float:
    """Relative gap between ``d/dt (u1 - u2)`` at ``t = 0`` and ``i (q2 - q1) u0``.

    The time derivative comes from a one-sided second-order difference of the
    computed ``u``, independently of the differentiated solves.
    """
    g = u.grid
    vals = u.values
    dudt0 = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) / (2.0 * g.dt)
    target = 1j * (q2.values - q1.values) * u0.u0
    den = spatial_l2_norm(target, g)
    return spatial_l2_norm(dudt0 - target, g) / den


def symmetrize_time(v: ComplexField, target: SpaceTimeGrid) -> ComplexField:
    """Extend ``v`` from ``[0, T)`` to ``(-T, T)`` by ``v(-t) = -conj(v(t))``."""
    if not target.symmetric_time:
        raise SymmetrizationError("target grid must be symmetric in time")
    half = target.half()
    if v.grid.n_time != half.n_time or not np.allclose(v.grid.t, half.t):
        raise SymmetrizationError("field time nodes are not the nonnegative half of the target")
    v0 = v.values[0]
    peak = float(np.max(np.abs(v0)))
    if peak > 0 and float(np.max(np.abs(v0.real))) > IMAG_TOL * peak:
        raise SymmetrizationError("v(0) is not purely imaginary; the extension would jump at t = 0")
    neg = -np.conj(v.values[:0:-1])
    vals = np.concatenate([neg, v.values], axis=0)
    vals[half.n_time - 1] = 1j * v0.imag  # exact reflection-invariant value at t = 0
    return ComplexField(target, vals)


def sup_series(f: ComplexField) -> np.ndarray:
    """``max |f(t, .)|`` for each time node."""
    return np.max(np.abs(f.values), axis=(1, 2))
