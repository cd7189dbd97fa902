"""Discrete geometry of the truncated waveguide.

The cross-section is an interval ``omega = (a, b)`` and the axial line is
truncated to ``[-X, X]``.  Fields are complex arrays indexed ``(t, x', x_n)``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

REGIONS = ("interior", "lateral", "axial_ends")


class GridError(ValueError):
    pass


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform tensor grid on a time axis times ``omega x (-X, X)``.

    With ``symmetric_time`` the time axis covers ``(-T, T)`` on staggered
    nodes ``t_k = -T + (k + 1/2) 2T / n_time``; otherwise it covers ``[0, T]``
    with both endpoints.
    """

    omega: tuple[float, float]
    X: float
    T: float
    n_xprime: int
    n_axial: int
    n_time: int
    symmetric_time: bool = False

    @property
    def h_xprime(self) -> float:
        return (self.omega[1] - self.omega[0]) / (self.n_xprime - 1)

    @property
    def h_axial(self) -> float:
        return 2.0 * self.X / (self.n_axial - 1)

    @property
    def dt(self) -> float:
        if self.symmetric_time:
            return 2.0 * self.T / self.n_time
        return self.T / (self.n_time - 1)

    @property
    def xprime(self) -> np.ndarray:
        return np.linspace(self.omega[0], self.omega[1], self.n_xprime)

    @property
    def xn(self) -> np.ndarray:
        return np.linspace(-self.X, self.X, self.n_axial)

    @property
    def t(self) -> np.ndarray:
        if self.symmetric_time:
            k = np.arange(self.n_time)
            return -self.T + (k + 0.5) * self.dt
        return np.linspace(0.0, self.T, self.n_time)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_time, self.n_xprime, self.n_axial)

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return (self.n_xprime, self.n_axial)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.t, self.xprime, self.xn, indexing="ij")

    def spatial_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xprime, self.xn, indexing="ij")

    # quadrature -----------------------------------------------------------
    def time_weights(self) -> np.ndarray:
        if self.symmetric_time:
            # staggered nodes are cell midpoints of a uniform partition
            return np.full(self.n_time, self.dt)
        return trapezoid_weights(self.n_time, self.dt)

    def xprime_weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_xprime, self.h_xprime)

    def axial_weights(self) -> np.ndarray:
        return trapezoid_weights(self.n_axial, self.h_axial)

    # boundary indexing ----------------------------------------------------
    def boundary_index(self, which: str) -> int:
        return 0 if which == "left" else self.n_xprime - 1

    def outward_normal(self, index: int) -> float:
        if index == 0:
            return -1.0
        if index == self.n_xprime - 1:
            return 1.0
        raise GridError(f"x' index {index} is not on the cross-section boundary")

    def half(self) -> "SpaceTimeGrid":
        """Nonnegative time nodes of a symmetric grid, as a ``[0, T']`` grid.

        Needs an odd node count so that ``t = 0`` is a node; the result has
        step ``dt`` and final time ``T (n-1)/n``.
        """
        if not self.symmetric_time:
            return self
        if self.n_time % 2 == 0:
            raise GridError("symmetric grid needs an odd n_time to contain t = 0")
        m = (self.n_time + 1) // 2
        return SpaceTimeGrid(self.omega, self.X, (m - 1) * self.dt, self.n_xprime,
                             self.n_axial, m, symmetric_time=False)

    def zero_index(self) -> Optional[int]:
        """Index of the node at ``t = 0`` if there is one."""
        hits = np.flatnonzero(np.abs(self.t) < 1e-12 * max(self.T, 1.0))
        return int(hits[0]) if hits.size else None

    def with_counts(self, n_xprime=None, n_axial=None, n_time=None, X=None) -> "SpaceTimeGrid":
        return SpaceTimeGrid(self.omega, self.X if X is None else X, self.T,
                             n_xprime or self.n_xprime, n_axial or self.n_axial,
                             n_time or self.n_time, self.symmetric_time)

    def refined(self, factor: int = 2) -> "SpaceTimeGrid":
        """Same box with every spacing divided by ``factor``."""
        if self.symmetric_time:
            nt = self.n_time * factor
            nt += 1 - nt % 2  # keep t = 0 a node
        else:
            nt = (self.n_time - 1) * factor + 1
        return SpaceTimeGrid(self.omega, self.X, self.T,
                             (self.n_xprime - 1) * factor + 1,
                             (self.n_axial - 1) * factor + 1, nt, self.symmetric_time)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def make_grid(omega=(0.0, 1.0), X=4.0, T=1.0, n_xprime=33, n_axial=129, n_time=65,
              symmetric_time=False, L: Optional[float] = None,
              ell: Optional[float] = None) -> SpaceTimeGrid:
    """Validate parameters and build a :class:`SpaceTimeGrid`.

    ``L`` and ``ell`` are the support parameters of the experiment that will
    live on the grid; the axial truncation must lie strictly outside them.
    """
    a, b = (float(v) for v in omega)
    if not b > a:
        raise GridError("cross-section must be a nonempty interval")
    if X <= 0 or T <= 0:
        raise GridError("extents X and T must be positive")
    for name, n in (("n_xprime", n_xprime), ("n_axial", n_axial), ("n_time", n_time)):
        if int(n) < 3:
            raise GridError(f"{name} must be at least 3, got {n}")
    if L is not None:
        if X <= L:
            raise GridError("axial truncation inside compact support (need X > L)")
        if ell is not None and not L > ell > 0:
            raise GridError("need L > ell > 0")
    return SpaceTimeGrid((a, b), float(X), float(T), int(n_xprime), int(n_axial),
                         int(n_time), bool(symmetric_time))


@dataclass(frozen=True)
class ComplexField:
    grid: SpaceTimeGrid
    values: np.ndarray
    region: str = "interior"

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if self.region not in REGIONS:
            raise RegionError(f"unknown region {self.region!r}")
        if self.region == "interior" and vals.shape != self.grid.shape:
            raise RegionError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values + other.values, self.region)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        return ComplexField(self.grid, self.values - other.values, self.region)

    def scaled(self, c: complex) -> "ComplexField":
        return ComplexField(self.grid, c * self.values, self.region)

    def at_time(self, k: int) -> np.ndarray:
        return self.values[k]

    def lateral(self) -> np.ndarray:
        """Values on ``{x' in boundary of omega}``, shape ``(nt, 2, nn)``."""
        return self.values[:, [0, -1], :]


@dataclass(frozen=True)
class Subboundary:
    """A piece of the lateral boundary ``(boundary of omega) x axial set``.

    ``points`` are x'-indices (0 or n_xprime-1).  ``axial`` is a closed
    interval or ``None`` for the whole truncated axis.
    """

    kind: str
    points: tuple[int, ...]
    axial: Optional[tuple[float, float]] = None

    def validate(self, grid: SpaceTimeGrid, L: Optional[float] = None) -> None:
        ends = {0, grid.n_xprime - 1}
        for p in self.points:
            if p not in ends:
                raise GridError(f"x' index {p} is not on the lateral boundary")
        if self.axial is not None:
            lo, hi = self.axial
            if lo < -grid.X or hi > grid.X:
                raise GridError("subboundary reaches past the axial truncation")
            if L is not None and (lo <= -L or hi >= L):
                raise GridError("Gamma* must lie inside the axial band (-L, L)")

    def axial_mask(self, grid: SpaceTimeGrid) -> np.ndarray:
        xn = grid.xn
        if self.axial is None:
            return np.ones_like(xn, dtype=bool)
        lo, hi = self.axial
        tol = 1e-12 * grid.X
        return (xn >= lo - tol) & (xn <= hi + tol)

    def members(self, grid: SpaceTimeGrid) -> list[tuple[float, float]]:
        xp = grid.xprime
        xn = grid.xn[self.axial_mask(grid)]
        return [(float(xp[p]), float(z)) for p in self.points for z in xn]

    def to_json(self, grid: Optional[SpaceTimeGrid] = None) -> dict:
        out = {"kind": self.kind, "points": list(self.points), "axial": self.axial}
        if grid is not None:
            out["xprime"] = [float(grid.xprime[p]) for p in self.points]
        return out


def gamma_star(grid: SpaceTimeGrid, points: Sequence[int], axial=None) -> Subboundary:
    sb = Subboundary("gamma_star", tuple(sorted(set(int(p) for p in points))), axial)
    sb.validate(grid)
    return sb


def full_lateral(grid: SpaceTimeGrid) -> Subboundary:
    return Subboundary("full", (0, grid.n_xprime - 1), None)


@dataclass(frozen=True)
class BoundaryTrace:
    """Samples on ``time x (boundary points) x axial nodes``."""

    grid: SpaceTimeGrid
    points: tuple[int, ...]
    values: np.ndarray
    axial_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if self.axial_mask is None:
            object.__setattr__(self, "axial_mask", np.ones(self.grid.n_axial, dtype=bool))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def norm(self, t_range: Optional[tuple[float, float]] = None) -> float:
        return trace_norm(self, t_range)


# --------------------------------------------------------------------------
# finite differences


def d1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order first derivative (one-sided at the ends)."""
    return np.gradient(f, h, axis=axis, edge_order=2)


def d2(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order second derivative, one-sided four-point stencils at the ends."""
    f = np.moveaxis(np.asarray(f), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    if f.shape[0] >= 4:
        out[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
        out[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out / (h * h), 0, axis)


def laplacian(f: np.ndarray, grid: SpaceTimeGrid, transverse_only: bool = False,
              xp_axis: int = -2, xn_axis: int = -1) -> np.ndarray:
    out = d2(f, grid.h_xprime, xp_axis)
    if not transverse_only:
        out = out + d2(f, grid.h_axial, xn_axis)
    return out


# --------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class Region:
    """Closed selections along each axis; ``None`` keeps the whole axis.

    ``xn_abs`` selects ``lo <= |x_n| <= hi`` (used for the slabs S_L).
    """

    t: Optional[tuple[float, float]] = None
    xprime: Optional[tuple[float, float]] = None
    xn: Optional[tuple[float, float]] = None
    xn_abs: Optional[tuple[float, float]] = None


def _axis_weights(nodes: np.ndarray, full: np.ndarray, sel) -> np.ndarray:
    if sel is None:
        return full
    lo, hi = sel
    scale = max(1.0, float(np.max(np.abs(nodes))))
    mask = (nodes >= lo - 1e-12 * scale) & (nodes <= hi + 1e-12 * scale)
    w = np.zeros_like(full)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return w
    h = nodes[1] - nodes[0]
    # contiguous runs get trapezoidal weights of their own
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        if run.size == 1:
            continue
        w[run] = h
        w[run[0]] = w[run[-1]] = 0.5 * h
    return w


def spatial_weights(grid: SpaceTimeGrid, region: Optional[Region] = None) -> np.ndarray:
    region = region or Region()
    wx = _axis_weights(grid.xprime, grid.xprime_weights(), region.xprime)
    wn = _axis_weights(grid.xn, grid.axial_weights(), region.xn)
    if region.xn_abs is not None:
        lo, hi = region.xn_abs
        wn = _axis_weights(grid.xn, grid.axial_weights(), (lo, hi)) + \
            _axis_weights(grid.xn, grid.axial_weights(), (-hi, -lo))
    return wx[:, None] * wn[None, :]


def region_weights(grid: SpaceTimeGrid, region: Optional[Region] = None) -> np.ndarray:
    region = region or Region()
    wt = _axis_weights(grid.t, grid.time_weights(), region.t)
    return wt[:, None, None] * spatial_weights(grid, region)[None]


def l2_norm(f, region: Optional[Region] = None, weight: Optional[np.ndarray] = None) -> float:
    """Trapezoidal approximation of ``(int weight |f|^2)^(1/2)``."""
    if isinstance(f, BoundaryTrace):
        if weight is not None:
            raise RegionError("boundary traces take no weight")
        return trace_norm(f, None if region is None else region.t)
    if not isinstance(f, ComplexField):
        raise TypeError("l2_norm expects a ComplexField")
    if f.region != "interior":
        raise RegionError(f"l2_norm over space-time needs an interior field, got {f.region!r}")
    q = region_weights(f.grid, region)
    dens = np.abs(f.values) ** 2
    if weight is not None:
        dens = dens * np.asarray(weight, dtype=float)
    return float(np.sqrt(np.sum(q * dens)))


def spatial_l2_norm(values: np.ndarray, grid: SpaceTimeGrid,
                    region: Optional[Region] = None) -> float:
    """Norm of a purely spatial array of shape ``(n_xprime, n_axial)``."""
    return float(np.sqrt(np.sum(spatial_weights(grid, region) * np.abs(values) ** 2)))


def trace_norm(tr: BoundaryTrace, t_range: Optional[tuple[float, float]] = None) -> float:
    grid = tr.grid
    wt = _axis_weights(grid.t, grid.time_weights(), t_range)
    idx = np.flatnonzero(tr.axial_mask)
    if idx.size == 0:
        return 0.0
    if idx.size == grid.n_axial:
        wn = grid.axial_weights()
    else:
        wn = _axis_weights(grid.xn, grid.axial_weights(), (grid.xn[idx[0]], grid.xn[idx[-1]]))
    # counting measure on the finitely many boundary points of omega
    dens = np.abs(tr.values) ** 2
    return float(np.sqrt(np.einsum("t,tpn,n->", wt, dens, wn)))


# --------------------------------------------------------------------------
# traces


def neumann_values(values: np.ndarray, grid: SpaceTimeGrid, point: int,
                   boundary_value: Optional[np.ndarray] = None) -> np.ndarray:
    """Outward normal derivative at one boundary point of omega.

    Three-point one-sided stencil in x' only: the normal of the lateral
    boundary has no axial component.
    """
    h = grid.h_xprime
    f = values
    if point == 0:
        f0 = f[..., 0, :] if boundary_value is None else boundary_value
        dfdx = (-3.0 * f0 + 4.0 * f[..., 1, :] - f[..., 2, :]) / (2.0 * h)
        return -dfdx
    if point == grid.n_xprime - 1:
        fN = f[..., -1, :] if boundary_value is None else boundary_value
        return (3.0 * fN - 4.0 * f[..., -2, :] + f[..., -3, :]) / (2.0 * h)
    raise GridError(f"x' index {point} is not on the lateral boundary")


def neumann_trace(f: ComplexField, b: Subboundary) -> BoundaryTrace:
    if b.kind == "axial_ends":
        raise RegionError("normal derivative on the axial ends is not supported")
    b.validate(f.grid)
    vals = np.stack([neumann_values(f.values, f.grid, p) for p in b.points], axis=1)
    mask = b.axial_mask(f.grid)
    vals = vals * mask[None, None, :]
    return BoundaryTrace(f.grid, b.points, vals, mask)


def measured_order(hs: Sequence[float], errs: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(h)."""
    hs = np.log(np.asarray(hs, dtype=float))
    es = np.log(np.asarray(errs, dtype=float))
    return float(np.polyfit(hs, es, 1)[0])


def pairwise_orders(errs: Sequence[float], factor: float = 2.0) -> list[float]:
    e = np.asarray(errs, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log(factor)) for i in range(len(e) - 1)]


# --------------------------------------------------------------------------
# serialization

_MAGIC = "WAVECARLEMAN-FIELD 1"


def field_to_csv(f: ComplexField) -> str:
    T, XP, XN = f.grid.mesh()
    buf = io.StringIO()
    buf.write("t,xprime,xn,re,im\n")
    rows = np.column_stack([T.ravel(), XP.ravel(), XN.ravel(),
                            f.values.real.ravel(), f.values.imag.ravel()])
    np.savetxt(buf, rows, delimiter=",", fmt="%.17g")
    return buf.getvalue()


def field_from_csv(text: str, grid: SpaceTimeGrid, region: str = "interior") -> ComplexField:
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    vals = (data[:, 3] + 1j * data[:, 4]).reshape(grid.shape)
    return ComplexField(grid, vals, region)


def field_to_bytes(f: ComplexField) -> bytes:
    g = f.grid
    header = "\n".join([
        _MAGIC,
        f"dims {g.n_time} {g.n_xprime} {g.n_axial}",
        f"spacing {g.dt!r} {g.h_xprime!r} {g.h_axial!r}",
        f"omega {g.omega[0]!r} {g.omega[1]!r}",
        f"X {g.X!r}",
        f"T {g.T!r}",
        f"symmetric_time {int(g.symmetric_time)}",
        f"region {f.region}",
        "dtype complex128-le",
        "end",
    ]) + "\n"
    return header.encode("ascii") + np.ascontiguousarray(f.values, dtype="<c16").tobytes()


def field_from_bytes(blob: bytes) -> ComplexField:
    end = blob.index(b"\nend\n") + len(b"\nend\n")
    lines = blob[:end].decode("ascii").splitlines()
    if lines[0] != _MAGIC:
        raise ValueError("not a field dump")
    meta = {ln.split(" ", 1)[0]: ln.split(" ", 1)[1] for ln in lines[1:-1]}
    nt, nx, nn = (int(v) for v in meta["dims"].split())
    a, b = (float(v) for v in meta["omega"].split())
    grid = SpaceTimeGrid((a, b), float(meta["X"]), float(meta["T"]), nx, nn, nt,
                         bool(int(meta["symmetric_time"])))
    vals = np.frombuffer(blob[end:], dtype="<c16").reshape(nt, nx, nn)
    return ComplexField(grid, vals.copy(), meta["region"])
