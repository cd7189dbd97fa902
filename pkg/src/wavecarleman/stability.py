"""Stability experiments for the inverse potential problem and a least-squares inversion.

One experiment takes an admissible pair ``(q1, q2)`` and a positive initial
state, runs the four forward solves, symmetrizes ``v = u1' - u2'`` in time
and reports every norm that enters the two Lipschitz inequalities, together
with the weighted intermediates of the argument (``J``, ``I(w)``, ``obs``).
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import splu

from .carleman import CutoffChi, I_functional, lemma1_identity, obs_functional, restrict_to_box
from .domain import (BoundaryTrace, ComplexField, Region, SpaceTimeGrid, Subboundary, d1, gamma_star,
                     make_grid, neumann_values, region_weights, spatial_l2_norm, spatial_weights)
from .forward import (AdmissibilityError, InitialState, Potential, _layout, _march_grid,
                      boundary_data_G, boundary_data_Gprime, closure_discrepancy,
                      derivative_initial_state, difference_system, solve_derivative,
                      sup_series, symmetrize_time, w2inf_surrogate)
from .weights import build_weights, check_assumption, minimal_gamma_star


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 0.5
    M: float = 10.0
    ell: float = 1.0
    L: float = 2.0
    alpha: float = 1.0
    T: float = 1.0
    X: float = 8.0
    n_xprime: int = 33
    n_axial: int = 257
    n_time: int = 65
    x0: float = -0.5
    r: float = 2.0
    lam: float = 0.1
    s: float = 5.0
    family_size: int = 20
    amplitude: float = 0.5
    bumps: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.L > self.ell > 0:
            raise ExperimentError("need L > ell > 0")
        if self.alpha <= 0:
            raise ExperimentError("alpha must be positive")
        if self.X <= self.L:
            raise ExperimentError("axial truncation inside compact support (need X > L)")
        if self.n_time % 2 == 0:
            raise ExperimentError("n_time must be odd so that t = 0 is a node")

    def grid(self) -> SpaceTimeGrid:
        """Symmetric grid on ``(-T, T)``; solves march on its nonnegative half."""
        return make_grid((0.0, 1.0), self.X, self.T, self.n_xprime, self.n_axial, self.n_time,
                         symmetric_time=True, L=self.L, ell=self.ell)

    def weights(self):
        return build_weights(self.x0, self.r, self.lam, self.T)

    def chi(self) -> CutoffChi:
        return CutoffChi(self.ell, self.L)

    def background(self, grid: SpaceTimeGrid) -> np.ndarray:
        return np.full(grid.spatial_shape, float(self.p))


# ---------------------------------------------------------------- sampling

def _bump(z):
    """``cos(pi z / 2)^8`` on ``|z| < 1``, zero outside; C7 with peak value 1.

    Polynomial-type flanks keep high derivatives moderate, which matters for
    time-stepping accuracy far more than infinite smoothness would.
    """
    out = np.zeros_like(z, dtype=float)
    m = np.abs(z) < 1
    out[m] = np.cos(0.5 * np.pi * z[m]) ** 8
    return out


def perturbation(grid: SpaceTimeGrid, ell: float, rng, amplitude: float, bumps: int) -> np.ndarray:
    """Random sum of separable bumps supported in ``omega x (-ell, ell)``.

    The transverse factor ``sin(m pi x')^3`` vanishes together with two
    derivatives on the boundary of omega, so ``p + delta`` keeps the
    boundary values of ``p``.
    """
    a, b = grid.omega
    XP, XN = grid.spatial_mesh()
    xs = (XP - a) / (b - a)
    out = np.zeros(grid.spatial_shape)
    for _ in range(bumps):
        m = int(rng.integers(1, 3))
        half = rng.uniform(0.4, 0.7) * ell
        c = rng.uniform(-(ell - half), ell - half)
        amp = amplitude * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        out += amp * np.sin(m * np.pi * xs) ** 3 * _bump((XN - c) / half)
    out[:, np.abs(grid.xn) >= ell] = 0.0
    return out


def _admissible(p: np.ndarray, delta: np.ndarray, grid: SpaceTimeGrid, M: float) -> np.ndarray:
    """Shrink ``delta`` until ``p + delta`` satisfies the W2,inf bound."""
    if w2inf_surrogate(p, grid) >= M:
        raise AdmissibilityError("M does not exceed the size of p; no room for a perturbation")
    if not np.any(delta):
        return delta
    c = 1.0
    while w2inf_surrogate(p + c * delta, grid) > M:
        c *= 0.8
        if c < 1e-8:
            raise AdmissibilityError("rescaling would force the perturbation to zero")
    return c * delta


def sample_admissible_pair(cfg: ExperimentConfig, rng, amplitude: float | None = None):
    grid = cfg.grid()
    sg = _march_grid(grid)
    p = cfg.background(sg)
    amp = cfg.amplitude if amplitude is None else amplitude
    d2 = _admissible(p, perturbation(sg, cfg.ell, rng, amp, cfg.bumps), sg, cfg.M)
    d1_ = _admissible(p, perturbation(sg, cfg.ell, rng, amp, cfg.bumps), sg, cfg.M)
    q1 = Potential(p + d1_, p, cfg.M, cfg.ell)
    q2 = Potential(p + d2, p, cfg.M, cfg.ell)
    return q1, q2


def sample_initial_state(cfg: ExperimentConfig, rng, modulation: float = 0.2,
                         bump_height: float | None = None) -> InitialState:
    """``u0 = chi(x_n) (alpha + c bump(x_n)) (1 + eps sin^2(pi x'))``.

    ``chi`` is the axial cutoff (1 on ``|x_n| <= ell``, 0 beyond
    ``(ell + L)/2``) so ``u0 >= alpha`` on ``omega x (-ell, ell)``.
    """
    grid = _march_grid(cfg.grid())
    XP, XN = grid.spatial_mesh()
    c = rng.uniform(0.2, 1.0) if bump_height is None else bump_height
    eps = modulation * rng.uniform(0.5, 1.0)
    width = cfg.ell * rng.uniform(0.6, 1.0)
    ax = cfg.chi().chi(XN) * (cfg.alpha + c * _bump(XN / width))
    u0 = ax * (1.0 + eps * np.sin(np.pi * XP) ** 2)
    st = InitialState(u0, cfg.alpha, cfg.ell)
    st.check(grid)
    return st


def h4_surrogate(u0: np.ndarray, grid: SpaceTimeGrid) -> float:
    """Sum of squared L2 norms of all finite-difference derivatives up to order four."""
    total = 0.0
    for i in range(5):
        for j in range(5 - i):
            a = u0
            for _ in range(i):
                a = d1(a, grid.h_xprime, 0)
            for _ in range(j):
                a = d1(a, grid.h_axial, 1)
            total += spatial_l2_norm(a, grid) ** 2
    return float(np.sqrt(total))


# ---------------------------------------------------------------- report

@dataclass
class StabilityReport:
    seed: int
    lhs: float
    neumann_gamma: float
    volume: float
    neumann_axis: float
    sup_u2: list
    sup_u2prime: list
    J: float
    I_w: float
    obs: float
    s: float
    alpha_factor: float
    closure: float = float("nan")

    @property
    def rhs_eq1a(self) -> float:
        return self.neumann_gamma + self.volume

    @property
    def ratio_eq1a(self) -> float:
        return self.lhs / self.rhs_eq1a if self.rhs_eq1a > 0 else float("nan")

    @property
    def ratio_eqa2(self) -> float:
        return self.lhs / self.neumann_axis if self.neumann_axis > 0 else float("nan")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "lhs": self.lhs,
            "rhs_eq1a": {"neumann": self.neumann_gamma, "volume": self.volume},
            "rhs_eqa2": self.neumann_axis,
            "ratio_eq1a": self.ratio_eq1a,
            "ratio_eqa2": self.ratio_eqa2,
            "assumption_as": {"sup_u2": self.sup_u2, "sup_u2prime": self.sup_u2prime},
            "intermediates": {"J": self.J, "I_w": self.I_w, "obs": self.obs, "s": self.s,
                              "alpha_factor": self.alpha_factor},
        }

    def dumps(self) -> str:
        return json.dumps(_finite(self.to_json()), sort_keys=True, indent=1)


def _finite(obj):
    # JSON has no NaN; report undefined ratios as null
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


SUMMARY_COLUMNS = ("seed", "lhs", "rhs_eq1a_neumann", "rhs_eq1a_volume", "rhs_eqa2",
                   "ratio_eq1a", "ratio_eqa2")


def family_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SUMMARY_COLUMNS)
    for r in reports:
        wr.writerow([r.seed] + [repr(float(x)) for x in
                                (r.lhs, r.neumann_gamma, r.volume, r.neumann_axis,
                                 r.ratio_eq1a, r.ratio_eqa2)])
    return buf.getvalue()


# ---------------------------------------------------------------- norms

def neumann_norm(v: ComplexField, points, axial=None) -> float:
    """``||d_nu v||`` over the time axis of ``v``, the given points and axial interval."""
    g = v.grid
    sel = Region(xn=axial)
    wt = region_weights(g, sel)[:, 0, :] / g.xprime_weights()[0]  # time x axial weights
    total = 0.0
    for p in points:
        total += float(np.sum(wt * np.abs(neumann_values(v.values, g, p)) ** 2))
    return float(np.sqrt(total))


def volume_norm(u: ComplexField, ut: ComplexField, ell: float, L: float) -> float:
    """``(||u||^2 + ||u_t||^2 + ||grad u||^2 + ||grad u_t||^2)^(1/2)`` over ``omega x S_L``."""
    g = u.grid
    wts = region_weights(g, Region(xn_abs=(ell, L)))
    total = 0.0
    for f in (u.values, ut.values):
        total += np.sum(wts * np.abs(f) ** 2)
        total += np.sum(wts * np.abs(d1(f, g.h_xprime, 1)) ** 2)
        total += np.sum(wts * np.abs(d1(f, g.h_axial, 2)) ** 2)
    return float(np.sqrt(total))


def run_stability(cfg: ExperimentConfig, pair, u0: InitialState, seed: int = 0,
                  gamma: Subboundary | None = None) -> StabilityReport:
    q1, q2 = pair
    grid = cfg.grid()
    half = _march_grid(grid)
    w = cfg.weights()
    chi = cfg.chi()
    if gamma is None:
        gamma = minimal_gamma_star(w, half)
    rep = check_assumption(w, gamma, half)
    if not rep.passed:
        raise ExperimentError("weight assumption fails for the chosen subboundary")
    ds = difference_system(q1, q2, u0, grid)
    V = symmetrize_time(ds.v, grid)

    dq = q1.values - q2.values
    lhs = spatial_l2_norm(dq, half)
    neu_gamma = neumann_norm(ds.v, gamma.points, (-chi.r_mid, chi.r_mid))
    neu_axis = neumann_norm(ds.v, gamma.points, None)
    vol = volume_norm(ds.u, ds.v, cfg.ell, cfg.L)

    s = cfg.s
    wbox = restrict_to_box(ComplexField(grid, chi.chi(grid.xn) * V.values), chi.L_O)
    if np.any(dq):
        J, _ = lemma1_identity(wbox, w, s)
        I_w = I_functional(wbox, w, s)
        ob = obs_functional(V, chi, w, s, gamma).total
        k0 = grid.zero_index()
        E0 = w.exp_weight(grid, s)[k0][:, 0]
        qterm = spatial_l2_norm(E0[:, None] * dq, half, Region(xn=(-cfg.ell, cfg.ell))) ** 2
        C_eee = I_w / (ob + qterm)
        factor = cfg.alpha ** 2 - C_eee * s ** -1.5
    else:
        J = I_w = ob = 0.0
        factor = cfg.alpha ** 2
    return StabilityReport(
        seed=int(seed), lhs=lhs, neumann_gamma=neu_gamma, volume=vol, neumann_axis=neu_axis,
        sup_u2=[float(x) for x in sup_series(ds.u2)],
        sup_u2prime=[float(x) for x in sup_series(ds.u2p)],
        J=float(J), I_w=float(I_w), obs=float(ob), s=float(s), alpha_factor=float(factor),
        closure=closure_discrepancy(ds.u, q1, q2, u0) if np.any(dq) else 0.0,
    )


def run_family(cfg: ExperimentConfig, size: int | None = None, workers: int = 1,
               amplitude: float | None = None) -> list[StabilityReport]:
    """Seeded family: member ``k`` uses ``default_rng([cfg.seed, k])``."""
    size = cfg.family_size if size is None else size

    def one(k):
        rng = np.random.default_rng([cfg.seed, k])
        pair = sample_admissible_pair(cfg, rng, amplitude)
        u0 = sample_initial_state(cfg, rng)
        return run_stability(cfg, pair, u0, seed=k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, range(size)))
    return [one(k) for k in range(size)]


def empirical_constants(reports) -> dict:
    r1 = [r.ratio_eq1a for r in reports if np.isfinite(r.ratio_eq1a)]
    r2 = [r.ratio_eqa2 for r in reports if np.isfinite(r.ratio_eqa2)]
    return {
        "C_eq1a": max(r1) if r1 else float("nan"),
        "C_eqa2": max(r2) if r2 else float("nan"),
        "spread_eq1a": max(r1) / min(r1) if r1 else float("nan"),
        "spread_eqa2": max(r2) / min(r2) if r2 else float("nan"),
    }


# ---------------------------------------------------------------- inversion

class DerivativeForwardMap:
    """``delta -> d_nu u'[p + delta]`` on ``(0, T) x gamma* x axis`` with its adjoint gradient.

    ``u'`` is the Crank–Nicolson solution of the time-differentiated problem
    (initial state ``i (Lap - q) u0``, lateral data ``g'``).  The unknown is
    ``delta`` on the interior x' nodes with ``|x_n| < ell``.
    """

    def __init__(self, cfg: ExperimentConfig, u0: InitialState, gamma_points=None):
        self.cfg = cfg
        grid = cfg.grid()
        self.grid = _march_grid(grid)
        g = self.grid
        self.u0 = u0
        self.p = cfg.background(g)
        self.points = tuple(gamma_points) if gamma_points is not None else \
            tuple(minimal_gamma_star(cfg.weights(), g).points)
        self.gp = boundary_data_Gprime(u0, self.p, grid).values
        lay = _layout(g)
        self.lay = lay
        nx, nn = g.spatial_shape
        mask = np.zeros((nx, nn), dtype=bool)
        mask[1:-1, np.abs(g.xn) < cfg.ell] = True
        self.mask = mask
        self.support = np.flatnonzero(mask.ravel())
        # positions of the unknowns inside the interior ordering
        pos = -np.ones(nx * nn, dtype=int)
        pos[lay.interior] = np.arange(lay.interior.size)
        self.sup_pos = pos[self.support]
        wt = g.time_weights()[:, None] * g.axial_weights()[None, :]
        self.obs_w = wt
        self._bnd = None
        self._obs_rows = self._observation_rows()
        self._reg = self._regularizer()

    @property
    def size(self) -> int:
        return self.support.size

    def embed(self, x: np.ndarray) -> np.ndarray:
        d = np.zeros(self.grid.spatial_shape)
        d.ravel()[self.support] = x
        return d

    def _observation_rows(self):
        """Interior positions and coefficients of the one-sided normal stencil."""
        g = self.grid
        nx, nn = g.spatial_shape
        h = g.h_xprime
        pos = -np.ones(nx * nn, dtype=int)
        pos[self.lay.interior] = np.arange(self.lay.interior.size)
        rows = []
        for p in self.points:
            if p == nx - 1:
                idx = [(nx - 2, -4.0 / (2 * h)), (nx - 3, 1.0 / (2 * h))]
                bcoef = 3.0 / (2 * h)
            else:
                idx = [(1, -4.0 / (2 * h)), (2, 1.0 / (2 * h))]
                bcoef = 3.0 / (2 * h)  # outward normal -1 flips the one-sided stencil
            cols = np.arange(1, nn - 1)
            entries = [(pos[(i * nn + cols)], c) for i, c in idx]
            rows.append((p, cols, entries, bcoef))
        return rows

    def _observe(self, zI: np.ndarray, bnd_full: np.ndarray) -> np.ndarray:
        """Neumann data ``(npoints, nn)`` from interior values and boundary row values."""
        nn = self.grid.n_axial
        out = np.zeros((len(self.points), nn), dtype=complex)
        for k, (p, cols, entries, bcoef) in enumerate(self._obs_rows):
            acc = bcoef * bnd_full[0 if p == 0 else 1, cols]
            for ids, c in entries:
                acc = acc + c * zI[ids]
            out[k, cols] = acc
        return out

    def _regularizer(self):
        """Sparse ``R`` with ``delta^T R delta = ||delta||^2_{H1(Omega_ell)}`` on the support."""
        g = self.grid
        nx, nn = g.spatial_shape
        W = sp.diags(spatial_weights(g, Region(xn=(-self.cfg.ell, self.cfg.ell))).ravel())

        def fwd(n, h):
            return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h

        Dx = sp.kron(fwd(nx, g.h_xprime), sp.identity(nn))
        Dn = sp.kron(sp.identity(nx), fwd(nn, g.h_axial))
        wx = np.full(nx - 1, g.h_xprime)
        wn = g.axial_weights()
        Wx = sp.diags(np.outer(wx, wn).ravel())
        wx2 = g.xprime_weights()
        wn2 = np.full(nn - 1, g.h_axial)
        Wn = sp.diags(np.outer(wx2, wn2).ravel())
        R = W + Dx.T @ Wx @ Dx + Dn.T @ Wn @ Dn
        S = sp.identity(nx * nn, format="csr")[self.support]
        return (S @ R @ S.T).tocsr()

    def _operators(self, q: np.ndarray):
        g = self.grid
        lay = self.lay
        H = (-lay.lap_II + sp.diags(q.ravel()[lay.interior])).tocsc()
        eye = sp.identity(H.shape[0], format="csc")
        A = (eye + 0.5j * g.dt * H).tocsc()
        B = (eye - 0.5j * g.dt * H).tocsc()
        return A, B

    def _boundary(self):
        if self._bnd is None:
            g = self.grid
            nx, nn = g.spatial_shape
            vecs, rows = [], []
            HIB = -self.lay.lap_IB
            for k in range(g.n_time):
                full = np.zeros((nx, nn), dtype=complex)
                full[0, :] = self.gp[k, 0]
                full[-1, :] = self.gp[k, 1]
                full[:, 0] = 0.0
                full[:, -1] = 0.0
                vecs.append(HIB @ full.ravel()[self.lay.boundary])
                rows.append(full[[0, -1], :])
            self._bnd = (vecs, rows)
        return self._bnd

    def solve(self, x: np.ndarray):
        """Return interior states ``z^n`` and the Neumann data, shape ``(nt, npoints, nn)``."""
        g = self.grid
        q = self.p + self.embed(x)
        qpot = Potential(q, self.p, np.inf, self.cfg.ell)
        A, B = self._operators(q)
        lu = splu(A)
        vecs, rows = self._boundary()
        init = derivative_initial_state(qpot, self.u0, g)
        zI = init.ravel()[self.lay.interior]
        Z = [zI]
        data = [self._observe(zI, rows[0])]
        for k in range(g.n_time - 1):
            rhs = B @ zI - 0.5j * g.dt * (vecs[k] + vecs[k + 1])
            zI = lu.solve(rhs)
            Z.append(zI)
            data.append(self._observe(zI, rows[k + 1]))
        return Z, np.array(data), (A, B)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.solve(x)[1]

    def _observe_adjoint(self, r: np.ndarray) -> np.ndarray:
        """Transpose-conjugate of the interior part of :meth:`_observe`."""
        out = np.zeros(self.lay.interior.size, dtype=complex)
        for k, (p, cols, entries, _) in enumerate(self._obs_rows):
            for ids, c in entries:
                np.add.at(out, ids, c * r[k, cols])
        return out

    def misfit(self, x, data, mu: float = 0.0):
        """Objective and its gradient with respect to the support values."""
        g = self.grid
        Z, pred, (A, B) = self.solve(x)
        res = pred - data
        W = self.obs_w  # (nt, nn)
        F = float(np.sum(W[:, None, :] * np.abs(res) ** 2))
        # adjoint sweep, A^H = B and B^H = A
        luB = splu(B)
        N = g.n_time - 1
        e = [self._observe_adjoint(W[n][None, :] * res[n]) for n in range(N + 1)]
        lam = e[N]
        u0I = np.asarray(self.u0.u0, dtype=float).ravel()[self.lay.interior]
        grad_int = np.zeros(self.lay.interior.size)
        for n in range(N - 1, -1, -1):
            mu_n1 = luB.solve(lam)
            grad_int += np.real(-0.5j * g.dt * np.conj(mu_n1) * (Z[n] + Z[n + 1]))
            lam = e[n] + A @ mu_n1
        grad_int += np.real(-1j * np.conj(lam) * u0I)
        grad = 2.0 * grad_int[self.sup_pos]
        reg = float(x @ (self._reg @ x))
        return F + mu * reg, grad + 2.0 * mu * (self._reg @ x)


@dataclass
class ReconstructionResult:
    potential: Potential
    iterations: int
    misfit: float
    converged: bool
    message: str


def reconstruct_potential(data: np.ndarray, cfg: ExperimentConfig, u0: InitialState,
                          q_ref: Potential | None = None, mu: float = 1e-6,
                          max_iters: int = 500, gamma_points=None) -> ReconstructionResult:
    """Regularized least-squares fit of the Neumann data of ``u'``.

    Minimizes ``||d_nu u'[q] - data||^2 / ||d_nu u'[q_ref] - data||^2 + mu ||q - q_ref||^2_{H1}`` over
    perturbations supported in ``omega x (-ell, ell)`` with L-BFGS-B and the
    adjoint-state gradient.
    """
    fm = DerivativeForwardMap(cfg, u0, gamma_points)
    g = fm.grid
    if q_ref is not None and not np.allclose(q_ref.values, fm.p):
        fm.p = np.array(q_ref.values, dtype=float)
    x0 = np.zeros(fm.size)
    # misfit relative to its value at q_ref, so mu does not depend on the data scale
    scale = fm.misfit(x0, data)[0]
    if scale == 0.0:
        return ReconstructionResult(Potential(fm.p.copy(), fm.p, cfg.M, cfg.ell), 0, 0.0, True,
                                    "data match the reference potential")

    def fun(x):
        f, gr = fm.misfit(x, data, mu * scale)
        return f / scale, gr / scale

    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iters, "ftol": 1e-16, "gtol": 1e-14})
    q = fm.p + fm.embed(res.x)
    return ReconstructionResult(Potential(q, fm.p, cfg.M, cfg.ell), int(res.nit),
                                float(res.fun * scale), bool(res.success), str(res.message))


def synthetic_data(cfg: ExperimentConfig, q_true: Potential, u0: InitialState,
                   noise: float = 0.0, rng=None, gamma_points=None) -> np.ndarray:
    """Neumann data of ``u'[q_true]`` with optional complex Gaussian noise.

    ``noise`` is relative to the root mean square of the part of the data
    that depends on the unknown, ``d_nu (u'[q_true] - u'[p])``; the response
    of the known background carries no information about ``q_true``.
    """
    fm = DerivativeForwardMap(cfg, u0, gamma_points)
    x = (q_true.values - fm.p)[fm.mask]
    data = fm(x)
    if noise > 0:
        rng = np.random.default_rng(0) if rng is None else rng
        rms = float(np.sqrt(np.mean(np.abs(data - fm(np.zeros_like(x))) ** 2)))
        data = data + noise * rms * (rng.normal(size=data.shape) + 1j * rng.normal(size=data.shape)) / np.sqrt(2)
    return data


def relative_error(q: Potential, q_true: Potential, grid: SpaceTimeGrid, ell: float) -> float:
    reg = Region(xn=(-ell, ell))
    num = spatial_l2_norm(q.values - q_true.values, grid, reg)
    den = spatial_l2_norm(q_true.values - q_true.p, grid, reg)
    return num / den if den > 0 else num
