"""Both sides of the weighted estimates, the axial cutoff and the two lemmas.

Bounded-domain evaluations live on the box ``omega x (-L_O, L_O)``; the
cylinder evaluations use the whole truncated axis.  Every squared norm is a
tensor-product quadrature (midpoint in time on the symmetric grid,
trapezoidal in space).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import ComplexField, SpaceTimeGrid, Subboundary, d1, d2, neumann_values, trapezoid_weights
from .weights import CarlemanWeights, apply_L, apply_M1, apply_M2

SWEEP_COLUMNS = ("s", "lhs_grad", "lhs_s3", "lhs_m1", "lhs_m2", "rhs_boundary", "rhs_source", "ratio")
DECAY_TOL = 1e-10


class CarlemanError(ValueError):
    pass


def smoothstep7(tau):
    """``35 t^4 - 84 t^5 + 70 t^6 - 20 t^7`` clipped to ``[0, 1]``; C3 at both ends."""
    t = np.clip(tau, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t ** 3)


def _smoothstep7_d(tau, order):
    t = np.clip(tau, 0.0, 1.0)
    inside = (tau > 0) & (tau < 1)
    if order == 1:
        val = 140.0 * t ** 3 * (1.0 - t) ** 3
    else:
        val = 420.0 * t ** 2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t)
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class CutoffChi:
    """Even axial cutoff: 1 on ``|x_n| <= ell``, 0 on ``|x_n| >= r_mid``."""

    ell: float
    L: float

    def __post_init__(self):
        if not 0 < self.ell < self.L:
            raise CarlemanError("cutoff needs 0 < ell < L")

    @property
    def r_mid(self) -> float:
        return 0.5 * (self.L + self.ell)

    @property
    def L_O(self) -> float:
        return 0.5 * (self.r_mid + self.L)

    def _tau(self, x):
        return (np.abs(x) - self.ell) / (self.r_mid - self.ell)

    def chi(self, x):
        return 1.0 - smoothstep7(self._tau(np.asarray(x, dtype=float)))

    def chi_dot(self, x):
        x = np.asarray(x, dtype=float)
        return -np.sign(x) * _smoothstep7_d(self._tau(x), 1) / (self.r_mid - self.ell)

    def chi_ddot(self, x):
        x = np.asarray(x, dtype=float)
        return -_smoothstep7_d(self._tau(x), 2) / (self.r_mid - self.ell) ** 2


def commutator_Kv(v: ComplexField, chi: CutoffChi) -> ComplexField:
    """``K v = chi'' v + 2 chi' d_xn v`` with centered axial differences."""
    g = v.grid
    xn = g.xn
    out = chi.chi_ddot(xn) * v.values + 2.0 * chi.chi_dot(xn) * d1(v.values, g.h_axial, 2)
    return ComplexField(g, out)


def apply_cutoff(v: ComplexField, chi: CutoffChi) -> ComplexField:
    return ComplexField(v.grid, chi.chi(v.grid.xn) * v.values)


# ---------------------------------------------------------------- sub-boxes

def box_grid(grid: SpaceTimeGrid, half_width: float) -> tuple[SpaceTimeGrid, slice]:
    """Sub-grid of the axial nodes with ``|x_n| <= half_width`` and its slice."""
    mid = (grid.n_axial - 1) // 2
    m = int(math.floor(half_width / grid.h_axial + 1e-9))
    if m < 1 or m > mid:
        raise CarlemanError("box half-width does not fit the axial grid")
    sub = SpaceTimeGrid(grid.omega, m * grid.h_axial, grid.T, grid.n_xprime, 2 * m + 1,
                        grid.n_time, grid.symmetric_time)
    return sub, slice(mid - m, mid + m + 1)


def restrict_to_box(v: ComplexField, half_width: float) -> ComplexField:
    sub, sl = box_grid(v.grid, half_width)
    return ComplexField(sub, v.values[:, :, sl])


# ---------------------------------------------------------------- quadrature

def _vol(a: np.ndarray, g: SpaceTimeGrid, axial: bool = True) -> float:
    """Space-time integral of a nonnegative density on the full grid."""
    wt = g.time_weights()[:, None, None] * g.xprime_weights()[None, :, None]
    if axial:
        wt = wt * g.axial_weights()[None, None, :]
    return float(np.sum(wt * a))


def _surface(a: np.ndarray, g: SpaceTimeGrid) -> float:
    """Integral over time and the axis of a density shaped ``(nt, nn)``."""
    wt = g.time_weights()[:, None] * g.axial_weights()[None, :]
    return float(np.sum(wt * a))


def _boundary_density(values, g: SpaceTimeGrid, weights: CarlemanWeights, s: float,
                      points, weighted: bool = True) -> np.ndarray:
    """Sum over boundary points of ``e^{-2 s eta} phi d_nu beta |d_nu f|^2``.

    Only points with ``d_nu beta > 0`` contribute; with ``weighted=False``
    the factor ``phi d_nu beta`` is dropped (but the sign restriction kept).
    """
    tab = weights.tables(g)
    E = weights.exp_weight(g, s)
    out = np.zeros((g.n_time, g.n_axial))
    for p in points:
        dnb = float(weights.dnu_beta(g.xprime[p], g.outward_normal(p)))
        if dnb <= 0:
            continue
        dn = neumann_values(values, g, p)
        dens = (E[:, p, :] ** 2) * np.abs(dn) ** 2
        if weighted:
            dens = dens * tab.phi[:, p, :] * dnb
        out += dens
    return out


@dataclass(frozen=True)
class CarlemanReport:
    s: float
    lhs_grad: float
    lhs_s3: float
    lhs_m1: float
    lhs_m2: float
    rhs_boundary: float
    rhs_source: float
    rhs_boundary_unweighted: float = 0.0
    underflow_fraction: float = 0.0

    @property
    def lhs(self) -> float:
        return self.lhs_grad + self.lhs_s3 + self.lhs_m1 + self.lhs_m2

    @property
    def rhs(self) -> float:
        return self.rhs_boundary + self.rhs_source

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else float("nan")

    def row(self) -> list:
        return [self.s, self.lhs_grad, self.lhs_s3, self.lhs_m1, self.lhs_m2,
                self.rhs_boundary, self.rhs_source, self.ratio]


def _sides(v: np.ndarray, g: SpaceTimeGrid, source: np.ndarray, weights: CarlemanWeights,
           s: float, points, full_gradient: bool, transverse_only: bool) -> CarlemanReport:
    if s <= 0:
        raise CarlemanError("s must be positive")
    E = weights.exp_weight(g, s)
    psi = ComplexField(g, E * v)
    axial = not transverse_only
    grad2 = np.abs(E * d1(v, g.h_xprime, 1)) ** 2
    if full_gradient:
        grad2 = grad2 + np.abs(E * d1(v, g.h_axial, 2)) ** 2
    m1 = apply_M1(psi, weights, s, transverse_only=transverse_only).values
    m2 = apply_M2(psi, weights, s).values
    bnd = _boundary_density(v, g, weights, s, points)
    bnd_u = _boundary_density(v, g, weights, s, points, weighted=False)
    wsum = 1.0 if axial else 1.0 / (2.0 * g.X)
    surf = (lambda a: _surface(a, g) * wsum)
    vol = (lambda a: _vol(a, g) * wsum)
    flushed = float(np.mean(-s * weights.tables(g).eta < np.log(1e-300)))
    return CarlemanReport(
        s=float(s),
        lhs_grad=s * vol(grad2),
        lhs_s3=s ** 3 * vol(np.abs(E * v) ** 2),
        lhs_m1=vol(np.abs(m1) ** 2),
        lhs_m2=vol(np.abs(m2) ** 2),
        rhs_boundary=s * surf(bnd),
        rhs_source=vol(np.abs(E * source) ** 2),
        rhs_boundary_unweighted=s * surf(bnd_u),
        underflow_fraction=flushed,
    )


def _check_lateral_zero(v: np.ndarray, tol: float = 1e-12) -> None:
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if np.max(np.abs(v[:, [0, -1], :])) > tol * scale:
        raise CarlemanError("field does not vanish on the lateral boundary")


def carleman_sides_bounded(w_field: ComplexField, source: ComplexField | None,
                           weights: CarlemanWeights, s: float, gamma: Subboundary | None = None,
                           tol: float = 1e-12) -> CarlemanReport:
    """Both sides of the bounded-domain estimate on the box carried by ``w_field``.

    ``w_field`` lives on a box grid (see :func:`restrict_to_box`) and must
    vanish on the whole box boundary.  The boundary term only sees points
    of ``gamma`` (default: both lateral points) where ``d_nu beta > 0``; the
    axial faces have ``d_nu beta = 0`` and never contribute.
    """
    g = w_field.grid
    v = w_field.values
    _check_lateral_zero(v, tol)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if np.max(np.abs(v[:, :, [0, -1]])) > tol * scale:
        raise CarlemanError("field does not vanish on the axial faces of the box")
    src = apply_L(w_field).values if source is None else source.values
    points = (0, g.n_xprime - 1) if gamma is None else tuple(gamma.points)
    return _sides(v, g, src, weights, s, points, full_gradient=True, transverse_only=False)


def carleman_sides_cylinder(v: ComplexField, source: ComplexField | None, weights: CarlemanWeights,
                            s: float, gamma: Subboundary | None = None,
                            transverse_only: bool = False, tol: float = 1e-12) -> CarlemanReport:
    """Both sides of the cylinder estimate (transverse gradient only on the left).

    With ``transverse_only`` the axial derivative is dropped from ``M1`` and
    ``L`` and every integral is divided by the axial length, which turns an
    ``x_n``-independent field into the bounded evaluation of its transverse
    factor on ``(-T, T) x omega``.
    """
    g = v.grid
    _check_lateral_zero(v.values, tol)
    if source is None:
        src = apply_L(v, transverse_only=transverse_only).values
    else:
        src = source.values
    points = (0, g.n_xprime - 1) if gamma is None else tuple(gamma.points)
    return _sides(v.values, g, src, weights, s, points, full_gradient=False,
                  transverse_only=transverse_only)


# ---------------------------------------------------------------- lemmas

def _zero_node(g: SpaceTimeGrid) -> int:
    if not g.symmetric_time:
        raise CarlemanError("lemma evaluations need a symmetric time grid")
    return int(np.flatnonzero(g.t <= 1e-12 * g.T)[-1])


def _decay_ok(phi: np.ndarray) -> bool:
    top = float(np.max(np.abs(phi)))
    return top == 0.0 or float(np.max(np.abs(phi[0]))) < DECAY_TOL * top


def lemma1_identity(w_field: ComplexField, weights: CarlemanWeights, s: float) -> tuple[float, float]:
    """``(J_direct, J_via_M1)`` with ``phi = e^{-s eta} w``.

    ``J_direct`` is ``||phi||^2`` on the last time node with ``t <= 0`` (the
    node ``t = 0`` itself when the node count is odd); ``J_via_M1`` is
    ``2 Im int M1 phi conj(phi)`` by trapezoidal quadrature over the nodes up
    to that one.
    """
    g = w_field.grid
    E = weights.exp_weight(g, s)
    phi = E * w_field.values
    if not _decay_ok(phi):
        raise CarlemanError("weighted field has not decayed at the earliest node; raise s or refine")
    k0 = _zero_node(g)
    sp = g.xprime_weights()[:, None] * g.axial_weights()[None, :]
    J_direct = float(np.sum(sp * np.abs(phi[k0]) ** 2))
    m1 = apply_M1(ComplexField(g, phi), weights, s).values
    dens = np.sum(sp[None] * np.imag(m1 * np.conj(phi)), axis=(1, 2))
    tw = trapezoid_weights(k0 + 1, g.dt)
    J_via = 2.0 * float(np.sum(tw * dens[: k0 + 1]))
    return J_direct, J_via


def I_functional(w_field: ComplexField, weights: CarlemanWeights, s: float) -> float:
    """``s||e^{-s eta} grad w||^2 + s^3||e^{-s eta} w||^2 + sum_j ||M_j e^{-s eta} w||^2``."""
    g = w_field.grid
    return _sides(w_field.values, g, np.zeros(g.shape), weights, s, (), True, False).lhs


@dataclass(frozen=True)
class Lemma2Result:
    J: float
    bound: float
    holds: bool


def lemma2_bound(w_field: ComplexField, weights: CarlemanWeights, s: float,
                 tol: float = 0.05) -> Lemma2Result:
    """``J`` against ``s^{-3/2} I(w)``; failure is reported, not raised."""
    J, _ = lemma1_identity(w_field, weights, s)
    bound = s ** -1.5 * I_functional(w_field, weights, s)
    return Lemma2Result(J, bound, bool(J <= bound * (1.0 + tol)))


# ---------------------------------------------------------------- obs

@dataclass(frozen=True)
class ObsTerms:
    s: float
    boundary: float
    volume0: float
    volume1: float

    @property
    def total(self) -> float:
        return self.boundary + self.volume0 + self.volume1


def obs_functional(v: ComplexField, chi: CutoffChi, weights: CarlemanWeights, s: float,
                   gamma: Subboundary | None = None) -> ObsTerms:
    """Observation functional with the frozen weight ``e^{-s eta(0, .)}``.

    The boundary part is the Neumann trace of ``w = chi v`` over time and
    the axis; the volume parts are ``v`` and its gradient over the band
    ``ell < |x_n| < r_mid``.
    """
    g = v.grid
    k0 = _zero_node(g)
    E0 = weights.exp_weight(g, s)[k0][None]  # (1, nxp, 1)
    w = chi.chi(g.xn) * v.values
    points = (g.n_xprime - 1,) if gamma is None else tuple(gamma.points)
    bnd = np.zeros((g.n_time, g.n_axial))
    for p in points:
        bnd += E0[:, p, :] ** 2 * np.abs(neumann_values(w, g, p)) ** 2
    band = ((np.abs(g.xn) >= chi.ell) & (np.abs(g.xn) <= chi.r_mid)).astype(float)
    vol_w = g.time_weights()[:, None, None] * g.xprime_weights()[None, :, None] \
        * (g.axial_weights() * band)[None, None, :]
    vals = v.values
    g2 = np.abs(d1(vals, g.h_xprime, 1)) ** 2 + np.abs(d1(vals, g.h_axial, 2)) ** 2
    return ObsTerms(
        s=float(s),
        boundary=s * _surface(bnd, g),
        volume0=float(np.sum(vol_w * E0 ** 2 * np.abs(vals) ** 2)),
        volume1=float(np.sum(vol_w * E0 ** 2 * g2)),
    )


# ---------------------------------------------------------------- test fields

def _packet(x, center, width):
    return np.exp(-((x - center) / width) ** 2)


def test_family(grid: SpaceTimeGrid, size: int, seed: int, chi: CutoffChi | None = None,
                modes: int = 3) -> list[ComplexField]:
    """Seeded smooth fields vanishing on the lateral boundary.

    Each member is a sum of transverse Dirichlet modes ``sin(m pi x')``
    times an axial Gaussian packet (or, with ``chi``, times the cutoff, which
    makes it vanish near ``|x_n| = r_mid``).  The first mode evolves with its
    own eigenvalue ``exp(-i pi^2 t)``; higher modes get slow random phases so
    that the time axis stays resolved on desk-scale grids.
    """
    rng = np.random.default_rng(seed)
    a, b = grid.omega
    T, XP, XN = grid.mesh()
    xs = (XP - a) / (b - a)
    out = []
    for _ in range(size):
        v = np.zeros(grid.shape, dtype=complex)
        for m in range(1, modes + 1):
            c = complex(rng.normal(), rng.normal()) / m
            mu = (np.pi / (b - a)) ** 2 if m == 1 else rng.uniform(-4.0, 4.0)
            if chi is None:
                ax = _packet(XN, rng.uniform(-0.3, 0.3), rng.uniform(0.5, 0.8))
            else:
                k = rng.integers(1, 3)
                ax = np.cos(k * np.pi * XN / (2 * chi.L) + rng.uniform(-0.3, 0.3)) * chi.chi(XN)
            v += c * np.sin(m * np.pi * xs) * ax * np.exp(-1j * mu * T)
        v[:, [0, -1], :] = 0.0
        out.append(ComplexField(grid, v))
    return out


# ---------------------------------------------------------------- sweeps

def s_values(s_min: float = 2.0, s_max: float = 40.0, count: int = 13) -> np.ndarray:
    return np.geomspace(s_min, s_max, count)


@dataclass
class SweepResult:
    variant: str
    rows: list = field(default_factory=list)  # (member, CarlemanReport)

    @property
    def C_fit(self) -> float:
        r = [rep.ratio for _, rep in self.rows if np.isfinite(rep.ratio)]
        return float(max(r)) if r else float("nan")

    def skipped(self) -> int:
        return sum(1 for _, rep in self.rows if not np.isfinite(rep.ratio))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("member",) + SWEEP_COLUMNS)
        for member, rep in self.rows:
            wr.writerow([member] + [repr(float(x)) for x in rep.row()])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"variant": self.variant, "C_fit": self.C_fit, "rows": len(self.rows),
                "skipped": self.skipped(),
                "max_underflow_fraction": max((rep.underflow_fraction for _, rep in self.rows),
                                              default=0.0)}


def carleman_sweep(fields, weights: CarlemanWeights, variant: str, s_list,
                   gamma: Subboundary | None = None, workers: int = 1) -> SweepResult:
    """Evaluate every (member, s) pair; results keep submission order."""
    if variant not in ("bounded", "cylinder"):
        raise CarlemanError(f"unknown variant {variant!r}")
    fn = carleman_sides_bounded if variant == "bounded" else carleman_sides_cylinder
    jobs = [(i, f, float(s)) for i, f in enumerate(fields) for s in s_list]

    def run(job):
        i, f, s = job
        return i, fn(f, None, weights, s, gamma)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]
    return SweepResult(variant, rows)
