"""Carleman weights and the conjugated operators ``M1``, ``M2``.

The base weight is ``btilde(x') = |x' - x0|^2`` with ``x0`` outside the
closed cross-section.  Everything derived from it (``beta``, ``phi``,
``eta`` and their derivatives) is evaluated analytically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .domain import ComplexField, SpaceTimeGrid, Subboundary, d1, d2, gamma_star

DEFAULT_LAMBDA = 0.1
DEFAULT_R = 2.0


class WeightError(ValueError):
    pass


class WeightTables(NamedTuple):
    """Weights on a grid, shaped ``(n_time, n_xprime, 1)`` for broadcasting."""

    beta: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    eta_t: np.ndarray
    grad_eta: np.ndarray
    lap_eta: np.ndarray


@dataclass(frozen=True)
class CarlemanWeights:
    x0: float
    r: float
    lam: float
    T: float
    omega: tuple[float, float]

    @property
    def btilde_sup(self) -> float:
        a, b = self.omega
        return max((a - self.x0) ** 2, (b - self.x0) ** 2)

    @property
    def K(self) -> float:
        return self.r * self.btilde_sup

    def btilde(self, xp):
        return (np.asarray(xp) - self.x0) ** 2

    def beta(self, xp):
        return self.btilde(xp) + self.K

    def _denominator(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.abs(t) >= self.T):
            raise WeightError("weights are singular at |t| >= T")
        return (self.T + t) * (self.T - t)

    def phi(self, t, xp):
        return np.exp(self.lam * self.beta(xp)) / self._denominator(t)

    def eta(self, t, xp):
        return (np.exp(2 * self.lam * self.K) - np.exp(self.lam * self.beta(xp))) / self._denominator(t)

    def eta_t(self, t, xp):
        t = np.asarray(t, dtype=float)
        num = np.exp(2 * self.lam * self.K) - np.exp(self.lam * self.beta(xp))
        return num * 2.0 * t / self._denominator(t) ** 2

    def grad_eta(self, t, xp):
        db = 2.0 * (np.asarray(xp) - self.x0)
        return -self.lam * np.exp(self.lam * self.beta(xp)) * db / self._denominator(t)

    def lap_eta(self, t, xp):
        db = 2.0 * (np.asarray(xp) - self.x0)
        e = np.exp(self.lam * self.beta(xp))
        return -(self.lam ** 2 * e * db ** 2 + 2.0 * self.lam * e) / self._denominator(t)

    def dnu_beta(self, xp, normal):
        """Normal derivative of ``beta`` (equal to that of ``btilde``)."""
        return 2.0 * (np.asarray(xp) - self.x0) * normal

    def tables(self, grid: SpaceTimeGrid) -> WeightTables:
        return _tables(self, grid)

    def exp_weight(self, grid: SpaceTimeGrid, s: float, floor: float = 1e-300) -> np.ndarray:
        """``exp(-s eta)`` on the grid, flushed to zero below ``floor``."""
        expo = -s * self.tables(grid).eta
        out = np.exp(np.maximum(expo, np.log(floor)))
        out[expo < np.log(floor)] = 0.0
        return out


@lru_cache(maxsize=32)
def _tables(w: CarlemanWeights, grid: SpaceTimeGrid) -> WeightTables:
    T, XP = np.meshgrid(grid.t, grid.xprime, indexing="ij")
    tabs = [w.beta(XP) + 0 * T, w.phi(T, XP), w.eta(T, XP), w.eta_t(T, XP),
            w.grad_eta(T, XP), w.lap_eta(T, XP)]
    out = []
    for a in tabs:
        a = np.ascontiguousarray(a[:, :, None])
        a.setflags(write=False)
        out.append(a)
    return WeightTables(*out)


def build_weights(x0_prime: float = -0.5, r: float = DEFAULT_R, lam: float = DEFAULT_LAMBDA,
                  T: float = 1.0, grid: SpaceTimeGrid | None = None,
                  omega: tuple[float, float] = (0.0, 1.0)) -> CarlemanWeights:
    if grid is not None:
        omega = grid.omega
        if abs(grid.T - T) > 1e-12 * T and grid.symmetric_time:
            raise WeightError("weights and grid disagree on T")
    a, b = omega
    if a <= x0_prime <= b:
        raise WeightError(f"x0' = {x0_prime} lies in the closed cross-section [{a}, {b}]")
    if r <= 1:
        raise WeightError("r must exceed 1")
    if lam <= 0:
        raise WeightError("lambda must be positive")
    return CarlemanWeights(float(x0_prime), float(r), float(lam), float(T), (float(a), float(b)))


@dataclass(frozen=True)
class AssumptionReport:
    c0: float
    boundary_signs: dict
    epsilon: float
    lambda1: float
    gamma_star: Subboundary
    passed: bool

    def to_json(self, grid: SpaceTimeGrid | None = None) -> dict:
        return {
            "c0": self.c0,
            "lambda1": self.lambda1,
            "epsilon": self.epsilon,
            "boundary_signs": {str(k): v for k, v in self.boundary_signs.items()},
            "gamma_star": self.gamma_star.to_json(grid),
            "pass": self.passed,
        }


def minimal_gamma_star(w: CarlemanWeights, grid: SpaceTimeGrid, axial=None) -> Subboundary:
    """Boundary points where ``(x' - x0) . nu' >= 0``."""
    pts = [p for p in (0, grid.n_xprime - 1)
           if w.dnu_beta(grid.xprime[p], grid.outward_normal(p)) >= 0]
    return gamma_star(grid, pts, axial)


def check_assumption(w: CarlemanWeights, gamma: Subboundary, grid: SpaceTimeGrid) -> AssumptionReport:
    xp = grid.xprime
    c0 = float(np.min(np.abs(2.0 * (xp - w.x0))))
    signs = {}
    ok_boundary = True
    for p in (0, grid.n_xprime - 1):
        val = float(w.dnu_beta(xp[p], grid.outward_normal(p)))
        signs[float(xp[p])] = val
        if p not in gamma.points and not val < 0:
            ok_boundary = False
    # m = 1: lam |btilde' z|^2 + btilde'' z^2 >= btilde'' z^2 = 2 z^2 for every lam > 0
    hess = np.full_like(xp, 2.0)
    epsilon = float(np.min(hess))
    lambda1 = 0.0
    ok_convex = epsilon > 0
    return AssumptionReport(c0, signs, epsilon, lambda1, gamma,
                            bool(c0 > 0 and ok_boundary and ok_convex))


def _check_s(s: float) -> None:
    if s < 0:
        raise WeightError("s must be nonnegative")


def _open(out: np.ndarray) -> np.ndarray:
    # lateral boundary rows carry the Dirichlet condition, not the equation
    out[:, 0, :] = 0.0
    out[:, -1, :] = 0.0
    return out


def apply_M1(psi: ComplexField, w: CarlemanWeights, s: float,
             transverse_only: bool = False) -> ComplexField:
    """``i psi_t + Lap psi + s^2 |grad_x' eta|^2 psi``.

    The Laplacian is the full one unless ``transverse_only`` is set, in
    which case the axial second derivative is dropped.
    """
    _check_s(s)
    g = psi.grid
    tab = w.tables(g)
    v = psi.values
    out = 1j * d1(v, g.dt, 0) + d2(v, g.h_xprime, 1)
    if not transverse_only:
        out += d2(v, g.h_axial, 2)
    out += (s * s) * tab.grad_eta ** 2 * v
    return ComplexField(g, _open(out))


def apply_M2(psi: ComplexField, w: CarlemanWeights, s: float) -> ComplexField:
    """``i s eta_t psi + 2 s grad_x' eta . grad_x' psi + s Lap_x' eta psi``."""
    _check_s(s)
    g = psi.grid
    tab = w.tables(g)
    v = psi.values
    out = 1j * s * tab.eta_t * v + 2.0 * s * tab.grad_eta * d1(v, g.h_xprime, 1) \
        + s * tab.lap_eta * v
    return ComplexField(g, _open(out))


def apply_L(psi: ComplexField, transverse_only: bool = False) -> ComplexField:
    """Schrödinger operator ``-i d_t - Lap`` by finite differences."""
    g = psi.grid
    v = psi.values
    out = -1j * d1(v, g.dt, 0) - d2(v, g.h_xprime, 1)
    if not transverse_only:
        out -= d2(v, g.h_axial, 2)
    return ComplexField(g, _open(out))


def _ratio(s, num, den):
    # exponent capped: beyond it psi must already vanish for the result to mean anything
    return np.exp(np.minimum(s * (num - den), 700.0))


def _conj_d1(v, eta, s, h, axis):
    """``exp(-s eta) d(exp(s eta) v)`` with only neighbour ratios exponentiated."""
    e = np.moveaxis(np.broadcast_to(eta, v.shape), axis, 0)
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (_ratio(s, e[2:], e[1:-1]) * v[2:] - _ratio(s, e[:-2], e[1:-1]) * v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * _ratio(s, e[1], e[0]) * v[1] - _ratio(s, e[2], e[0]) * v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * _ratio(s, e[-2], e[-1]) * v[-2]
               + _ratio(s, e[-3], e[-1]) * v[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _conj_d2(v, eta, s, h, axis):
    e = np.moveaxis(np.broadcast_to(eta, v.shape), axis, 0)
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (_ratio(s, e[2:], e[1:-1]) * v[2:] - 2 * v[1:-1]
                 + _ratio(s, e[:-2], e[1:-1]) * v[:-2])
    out[0] = (2 * v[0] - 5 * _ratio(s, e[1], e[0]) * v[1] + 4 * _ratio(s, e[2], e[0]) * v[2]
              - _ratio(s, e[3], e[0]) * v[3])
    out[-1] = (2 * v[-1] - 5 * _ratio(s, e[-2], e[-1]) * v[-2]
               + 4 * _ratio(s, e[-3], e[-1]) * v[-3] - _ratio(s, e[-4], e[-1]) * v[-4])
    return np.moveaxis(out / (h * h), 0, axis)


def conjugated_L(psi: ComplexField, w: CarlemanWeights, s: float) -> ComplexField:
    """``exp(-s eta) L(exp(s eta) psi)`` by finite differences of the product.

    Only ratios of neighbouring exponentials are formed, so ``exp(s eta)``
    never overflows even where ``s eta`` is huge.
    """
    g = psi.grid
    eta = w.tables(g).eta
    v = psi.values
    out = -1j * _conj_d1(v, eta, s, g.dt, 0) - _conj_d2(v, eta, s, g.h_xprime, 1) \
        - d2(v, g.h_axial, 2)
    return ComplexField(g, _open(out))


def conjugation_residual(psi: ComplexField, w: CarlemanWeights, s: float) -> ComplexField:
    """``exp(-s eta) L(exp(s eta) psi) + (M1 + M2) psi``; zero in the continuum."""
    res = conjugated_L(psi, w, s).values + apply_M1(psi, w, s).values + apply_M2(psi, w, s).values
    return ComplexField(psi.grid, res)
