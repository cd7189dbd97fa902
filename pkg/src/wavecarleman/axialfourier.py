"""Axial Fourier transform and the dimension-reducing group ``U_t``.

The axial axis is treated as periodic with period ``2X``: node ``x_n = X``
duplicates ``x_n = -X`` and is dropped before transforming, then restored
on the way back.  With the unitary DFT normalization the multiplier
``exp(i t k^2)`` is exactly unitary on the discrete side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import BoundaryTrace, ComplexField, SpaceTimeGrid, d1, neumann_values
from .weights import CarlemanWeights, apply_M1, apply_M2

# tolerance classes for residual reports
EXACT = "exact"
SECOND_ORDER = "second_order"
EXACT_TOL = 1e-12


@dataclass(frozen=True)
class AxialSpectrum:
    grid: SpaceTimeGrid
    values: np.ndarray  # (..., n_axial - 1) over the periodic nodes

    @property
    def k(self) -> np.ndarray:
        return wavenumbers(self.grid)

    def norm(self) -> float:
        return periodic_norm(self.values, self.grid, spectral=True)


def wavenumbers(grid: SpaceTimeGrid) -> np.ndarray:
    n = grid.n_axial - 1
    return 2.0 * np.pi * np.fft.fftfreq(n, d=grid.h_axial)


def _periodic(values: np.ndarray) -> np.ndarray:
    return values[..., :-1]


def _close(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values, values[..., :1]], axis=-1)


def periodic_norm(values: np.ndarray, grid: SpaceTimeGrid, spectral: bool = False) -> float:
    """Discrete L2 norm over the periodic axial nodes and all leading axes.

    Time and x' carry their usual quadrature weights when the array has
    those axes; the axial measure is ``h_axial`` per node (or the matching
    spectral measure, which is the same under the unitary DFT).
    """
    dens = np.abs(values) ** 2
    if dens.ndim == 3:
        w = grid.time_weights()[:, None, None] * grid.xprime_weights()[None, :, None]
        dens = dens * w
    return float(np.sqrt(grid.h_axial * np.sum(dens)))


def axial_dft(f) -> AxialSpectrum:
    vals = f.values if isinstance(f, (ComplexField, BoundaryTrace)) else np.asarray(f)
    grid = f.grid
    return AxialSpectrum(grid, np.fft.fft(_periodic(vals), axis=-1, norm="ortho"))


def axial_idft(spec: AxialSpectrum) -> np.ndarray:
    return _close(np.fft.ifft(spec.values, axis=-1, norm="ortho"))


def _multiplier(grid: SpaceTimeGrid, t) -> np.ndarray:
    k = wavenumbers(grid)
    t = np.asarray(t, dtype=float)
    return np.exp(1j * t[..., None] * k ** 2)


def apply_Ut(f, t: float):
    """``U_t = F^-1 exp(i t k^2) F`` applied to every slice of ``f``."""
    vals = f.values if isinstance(f, (ComplexField, BoundaryTrace)) else np.asarray(f)
    hat = np.fft.fft(_periodic(vals), axis=-1, norm="ortho")
    out = _close(np.fft.ifft(hat * _multiplier(f.grid, t), axis=-1, norm="ortho"))
    return _rewrap(f, out)


def _rewrap(f, out):
    if isinstance(f, ComplexField):
        return ComplexField(f.grid, out, f.region)
    if isinstance(f, BoundaryTrace):
        return BoundaryTrace(f.grid, f.points, out, f.axial_mask)
    return out


def evolve_nodes(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Apply ``U_{t_k}`` to slice ``k`` of an array whose first axis is time."""
    hat = np.fft.fft(_periodic(values), axis=-1, norm="ortho")
    mult = _multiplier(grid, grid.t)  # (nt, nk)
    shape = (grid.n_time,) + (1,) * (hat.ndim - 2) + (mult.shape[-1],)
    return _close(np.fft.ifft(hat * mult.reshape(shape), axis=-1, norm="ortho"))


def reduce_dimension(v):
    """``w(t_k) = U_{t_k} v(t_k)`` for every time node."""
    return _rewrap(v, evolve_nodes(v.values, v.grid))


def spectral_dxx(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    k = wavenumbers(grid)
    hat = np.fft.fft(_periodic(values), axis=-1)
    return _close(np.fft.ifft(-(k ** 2) * hat, axis=-1))


def _dt(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    return d1(values, grid.dt, 0)


def _lap_x(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    from .domain import d2
    out = d2(values, grid.h_xprime, 1)
    out[:, 0, :] = 0.0
    out[:, -1, :] = 0.0
    return out


def L_cylinder(v: ComplexField) -> np.ndarray:
    """``-i d_t - Lap_x' - d_xn^2`` with spectral axial and difference time derivatives."""
    g = v.grid
    out = -1j * _dt(v.values, g) - _lap_x(v.values, g) - spectral_dxx(v.values, g)
    out[:, [0, -1], :] = 0.0
    return out


def L_section(w: ComplexField) -> np.ndarray:
    """``-i d_t - Lap_x'`` applied slice by slice in ``x_n``."""
    g = w.grid
    out = -1j * _dt(w.values, g) - _lap_x(w.values, g)
    out[:, [0, -1], :] = 0.0
    return out


def M1_section(psi: np.ndarray, grid: SpaceTimeGrid, weights: CarlemanWeights, s: float) -> np.ndarray:
    """``M_{1,n-1}``: ``i d_t + Lap_x' + s^2 |grad eta|^2``, no axial derivative."""
    tab = weights.tables(grid)
    out = 1j * _dt(psi, grid) + _lap_x(psi, grid) + s * s * tab.grad_eta ** 2 * psi
    out[:, [0, -1], :] = 0.0
    return out


def M1_cylinder(psi: np.ndarray, grid: SpaceTimeGrid, weights: CarlemanWeights, s: float) -> np.ndarray:
    """``M_{1,n}`` with a spectral axial second derivative."""
    out = M1_section(psi, grid, weights, s) + spectral_dxx(psi, grid)
    out[:, [0, -1], :] = 0.0
    return out


@dataclass(frozen=True)
class Residual:
    identity_name: str
    norm_residual: float
    relative_residual: float
    tolerance_class: str

    def to_json(self) -> dict:
        return {"identity_name": self.identity_name, "norm_residual": self.norm_residual,
                "relative_residual": self.relative_residual,
                "tolerance_class": self.tolerance_class}


def _residual(name, diff, ref, grid, cls) -> Residual:
    n = periodic_norm(diff, grid)
    r = periodic_norm(ref, grid)
    return Residual(name, n, n / r if r > 0 else n, cls)


def _boundary_weight(weights: CarlemanWeights, grid: SpaceTimeGrid, s: float, point: int):
    """``exp(-s eta) phi^(1/2) (d_nu beta)^(1/2)`` on one boundary point, shape ``(nt, 1)``."""
    tab = weights.tables(grid)
    xp = grid.xprime[point]
    dnb = weights.dnu_beta(xp, grid.outward_normal(point))
    e = weights.exp_weight(grid, s)[:, point, :]
    return e * np.sqrt(tab.phi[:, point, :]) * np.sqrt(max(dnb, 0.0))


def commutator_residuals(f: ComplexField, weights: CarlemanWeights, s: float,
                         gamma_points=(None,)) -> list[Residual]:
    """Discrete norms of the commutation identities behind the cylinder estimate."""
    g = f.grid
    v = f.values
    U = lambda a: evolve_nodes(a, g)  # noqa: E731
    Uf = U(v)
    out = []
    # (comm1): [i d_t, U] f = d_xn^2 U f
    lhs = 1j * _dt(Uf, g) - U(1j * _dt(v, g))
    rhs = spectral_dxx(Uf, g)
    out.append(_residual("comm1", lhs - rhs, rhs, g, SECOND_ORDER))
    # (comm2): [d_x', U] = 0 and [exp(-s eta), U] = 0
    dx = lambda a: d1(a, g.h_xprime, 1)  # noqa: E731
    out.append(_residual("comm2_dx", dx(Uf) - U(dx(v)), dx(Uf), g, EXACT))
    E = weights.exp_weight(g, s)
    out.append(_residual("comm2_weight", E * Uf - U(E * v), E * Uf, g, EXACT))
    # (co-w)
    out.append(_residual("co_w_grad", E * dx(Uf) - U(E * dx(v)), E * dx(Uf), g, EXACT))
    # (co-M): M_{j,n-1}(e^{-s eta} U f) = U M_{j,n}(e^{-s eta} f)
    m1_lhs = M1_section(E * Uf, g, weights, s)
    m1_rhs = U(M1_cylinder(E * v, g, weights, s))
    out.append(_residual("co_M1", m1_lhs - m1_rhs, m1_rhs, g, SECOND_ORDER))
    m2_lhs = apply_M2(ComplexField(g, E * Uf), weights, s).values
    m2_rhs = U(apply_M2(ComplexField(g, E * v), weights, s).values)
    out.append(_residual("co_M2", m2_lhs - m2_rhs, m2_rhs, g, EXACT))
    # (Lnminonew) and (co-L)
    lw = L_section(ComplexField(g, Uf))
    lv = U(L_cylinder(f))
    out.append(_residual("Lnminonew", lw - lv, lv, g, SECOND_ORDER))
    out.append(_residual("co_L", E * lw - U(E * L_cylinder(f)), E * lv, g, SECOND_ORDER))
    # (co-trace): boundary weight times the normal derivative on gamma*
    for p in gamma_points:
        if p is None:
            p = g.n_xprime - 1
        bw = _boundary_weight(weights, g, s, p)
        tw = bw * neumann_values(Uf, g, p)
        tv = U(bw * neumann_values(v, g, p))
        out.append(_residual(f"co_trace_{p}", tw - tv, tw, g, EXACT))
    return out


def isometry_boundary(phi: BoundaryTrace) -> tuple[float, float]:
    """``(||U_t Phi||, ||Phi||)`` over time, boundary points and the periodic axis."""
    g = phi.grid
    vals = phi.values
    hat = np.fft.fft(_periodic(vals), axis=-1, norm="ortho")
    mult = _multiplier(g, g.t)[:, None, :]
    uphi = np.fft.ifft(hat * mult, axis=-1, norm="ortho")
    wt = g.time_weights()[:, None, None]
    a = float(np.sqrt(g.h_axial * np.sum(wt * np.abs(uphi) ** 2)))
    b = float(np.sqrt(g.h_axial * np.sum(wt * np.abs(_periodic(vals)) ** 2)))
    return a, b


def smooth_test_field(grid: SpaceTimeGrid, seed: int = 0) -> ComplexField:
    """Seeded smooth field: Dirichlet modes in x', Gaussians in x_n, a compact bump in t.

    The same seed gives samples of the same function on every grid, so it
    serves refinement studies.
    """
    rng = np.random.default_rng(seed)
    T, XP, XN = grid.mesh()
    a, b = grid.omega
    xs = (XP - a) / (b - a)
    v = np.zeros(grid.shape, dtype=complex)
    for m in (1, 2, 3):
        c = complex(rng.normal(), rng.normal())
        centre, width, freq = rng.uniform(-0.3, 0.3), rng.uniform(0.2, 0.5), rng.uniform(-3, 3)
        v += c * np.sin(m * np.pi * xs) * np.exp(-(XN - centre) ** 2 / width) * np.exp(1j * freq * T)
    z = T / (0.5 * grid.T)
    bump = np.zeros_like(z)
    inside = np.abs(z) < 1
    bump[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return ComplexField(grid, v * bump)


def residual_study(grid: SpaceTimeGrid, weights: CarlemanWeights, s: float, seed: int = 0,
                   levels: int = 3, gamma_points=(None,)) -> dict:
    """Residuals of every identity on ``levels`` time refinements of ``grid``.

    The axial and transverse parts of the identities commute exactly, so only
    the time step matters for the second-order class.  Returns, per identity,
    the tolerance class, the relative residuals, the step sizes and the
    least-squares order (second-order class only).
    """
    from .domain import measured_order
    out = {}
    g = grid
    for _ in range(levels):
        for r in commutator_residuals(smooth_test_field(g, seed), weights, s, gamma_points):
            e = out.setdefault(r.identity_name, {"tolerance_class": r.tolerance_class,
                                                 "relative_residual": [], "dt": []})
            e["relative_residual"].append(r.relative_residual)
            e["dt"].append(g.dt)
        g = g.with_counts(n_time=2 * g.n_time - 1)
    for e in out.values():
        if e["tolerance_class"] == SECOND_ORDER:
            e["order"] = measured_order(e["dt"], e["relative_residual"])
            e["pass"] = bool(1.8 <= e["order"] <= 2.2)
        else:
            e["pass"] = bool(max(e["relative_residual"]) <= EXACT_TOL)
    return out
