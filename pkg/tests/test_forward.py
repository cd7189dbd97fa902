import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavecarleman.domain import ComplexField, l2_norm, make_grid, measured_order, spatial_l2_norm
from wavecarleman.forward import (AdmissibilityError, InitialState, Potential, SolverError,
                                  SymmetrizationError, boundary_data_G, boundary_data_Gprime,
                                  check_pair, derivative_initial_state, difference_system,
                                  discrete_laplacian, potential_from, solve_derivative,
                                  solve_schrodinger, symmetrize_time)


def _bump(z):
    out = np.zeros_like(z)
    m = np.abs(z) < 1
    out[m] = np.cos(0.5 * np.pi * z[m]) ** 8
    return out


def _eigen_setup(f, m=2, X=4.0):
    g = make_grid((0.0, 1.0), X, 1.0, 8 * f + 1, 32 * f + 1, 16 * f + 1)
    XP, XN = g.spatial_mesh()
    u0v = np.sin(np.pi * XP) * np.sin(np.pi * m * (XN + X) / (2 * X))
    mu = np.pi ** 2 + (m * np.pi / (2 * X)) ** 2
    return g, u0v, mu


def _smooth_state(g, alpha=1.0):
    XP, XN = g.spatial_mesh()
    return InitialState((alpha + 0.5 * _bump(XN / 1.2)) * _bump(XN / 1.8) * (1 + 0.1 * np.sin(np.pi * XP) ** 2)
                        + 0.0, 0.0, 1.0)


def test_G_at_zero_is_u0(grid):
    st_ = _smooth_state(grid.half())
    g = boundary_data_G(st_, 0.5, grid)
    assert np.array_equal(g.values[0], st_.u0[[0, -1], :].astype(complex))


def test_G_constant_when_operator_vanishes():
    g = make_grid((0.0, 1.0), 4.0, 1.0, 17, 65, 17)
    XP, XN = g.spatial_mesh()
    # (Lap - p) u0 = 0 for u0 = 1 + x' with p = 0; the one-sided stencils are exact on it
    u0 = InitialState((1.0 + XP) * np.ones_like(XN), 0.0, 1.0)
    gv = boundary_data_G(u0, 0.0, g).values
    assert np.allclose(gv, gv[0][None], atol=1e-10)


def test_G_vanishes_for_sine_profile():
    errs = []
    for f in (1, 2, 4):
        g = make_grid((0.0, 1.0), 4.0, 1.0, 8 * f + 1, 32 * f + 1, 5)
        XP, XN = g.spatial_mesh()
        u0 = InitialState(np.sin(np.pi * XP) * _bump(XN / 2), 0.0, 1.0)
        errs.append(np.max(np.abs(boundary_data_G(u0, 0.0, g).values)))
    assert errs[-1] < 1e-2 and errs[0] / errs[-1] > 10


def test_Gprime_is_time_derivative_of_G(grid):
    st_ = _smooth_state(grid.half())
    g = boundary_data_G(st_, 0.5, grid).values
    gp = boundary_data_Gprime(st_, 0.5, grid).values
    h = grid.dt
    assert np.allclose((g[2:] - g[:-2]) / (2 * h), gp[1:-1], atol=1e-10)


def test_eigenfunction_convergence():
    errs, errsp, hs = [], [], []
    for f in (1, 2, 4):
        g, u0v, mu = _eigen_setup(f)
        q = potential_from(0.0, g)
        st_ = InitialState(u0v, 0.0, 1.0)
        zero = np.zeros((g.n_time, 2, g.n_axial))
        u = solve_schrodinger(q, st_, zero, g)
        ex = np.exp(-1j * mu * g.t)[:, None, None] * u0v[None]
        errs.append(l2_norm(u - ComplexField(g, ex)) / l2_norm(ComplexField(g, ex)))
        up = solve_derivative(q, st_, zero, g)
        errsp.append(l2_norm(up - ComplexField(g, -1j * mu * ex)) / l2_norm(ComplexField(g, mu * ex)))
        hs.append(g.h_xprime)
    assert 1.8 <= measured_order(hs, errs) <= 2.2
    assert 1.8 <= measured_order(hs, errsp) <= 2.2


def test_norm_conservation(rng):
    g = make_grid((0.0, 1.0), 4.0, 1.0, 17, 65, 33)
    XP, XN = g.spatial_mesh()
    q = potential_from(1.0 + 0.5 * np.cos(XN) * XP, g)
    u0 = InitialState(np.sin(np.pi * XP) * _bump(XN / 2) * (1 + XP), 0.0, 1.0)
    u = solve_schrodinger(q, u0, np.zeros((g.n_time, 2, g.n_axial)), g)
    norms = np.array([spatial_l2_norm(u.values[k], g) for k in range(g.n_time)])
    assert np.ptp(norms) / norms[0] < 1e-10


def test_equal_potentials_give_identical_solutions(grid):
    half = grid.half()
    st_ = _smooth_state(half)
    q = potential_from(0.5, half)
    ds = difference_system(q, q, st_, grid)
    assert not np.any(ds.u.values) and not np.any(ds.v.values)


def test_incompatible_boundary_data_rejected():
    g = make_grid((0.0, 1.0), 4.0, 1.0, 9, 17, 9)
    XP, XN = g.spatial_mesh()
    u0 = InitialState(np.ones_like(XP), 0.0, 1.0)
    with pytest.raises(SolverError):
        solve_schrodinger(potential_from(0.0, g), u0, np.zeros((9, 2, 17)), g)
    with pytest.raises(SolverError):
        solve_schrodinger(potential_from(0.0, g), u0, np.ones((9, 2, 5)), g)


def test_derivative_initial_state_and_consistency():
    errs, hs = [], []
    for f in (1, 2, 4):
        g = make_grid((0.0, 1.0), 4.0, 1 / 64, 17, 65, 16 * f + 1)
        XP, XN = g.spatial_mesh()
        q = potential_from(0.5 + 0.3 * np.sin(np.pi * XP) ** 3 * _bump(XN), g, p=0.5)
        st_ = _smooth_state(g)
        u = solve_schrodinger(q, st_, boundary_data_G(st_, 0.5, g), g)
        up = solve_derivative(q, st_, boundary_data_Gprime(st_, 0.5, g), g)
        if f == 1:
            init = derivative_initial_state(q, st_, g)
            assert np.allclose(up.values[0, 1:-1], init[1:-1])
            assert np.max(np.abs(up.values[0].real)) == 0.0
        fd = (u.values[2:] - u.values[:-2]) / (2 * g.dt)
        errs.append(np.max(np.abs(fd - up.values[1:-1])) / np.max(np.abs(up.values)))
        hs.append(g.dt)
    assert 1.8 <= measured_order(hs, errs) <= 2.2


def test_difference_system_data(grid):
    half = grid.half()
    XP, XN = half.spatial_mesh()
    st_ = _smooth_state(half)
    d = 0.1 * np.sin(np.pi * XP) ** 3 * _bump(XN / 0.8)
    q1 = Potential(0.5 + d, np.full_like(d, 0.5), 10.0, 1.0)
    q2 = Potential(np.full_like(d, 0.5), np.full_like(d, 0.5), 10.0, 1.0)
    ds = difference_system(q1, q2, st_, grid)
    assert np.max(np.abs(ds.u.values[0])) == 0.0
    assert np.max(np.abs(ds.u.values[:, [0, -1], :])) == 0.0
    assert np.allclose(ds.v.values[0], 1j * (q2.values - q1.values) * st_.u0, atol=1e-12)
    assert np.allclose(ds.fprime.values, (q2.values - q1.values)[None] * ds.u2p.values)


def test_difference_system_pde_residual():
    errs, hs = [], []
    for f in (1, 2, 4):
        g = make_grid((0.0, 1.0), 4.0, 1 / 64, 17, 65, 16 * f + 1)
        XP, XN = g.spatial_mesh()
        st_ = _smooth_state(g)
        d = 0.1 * np.sin(np.pi * XP) ** 3 * _bump(XN / 0.8)
        p = np.full_like(d, 0.5)
        q1, q2 = Potential(p + d, p, 10.0, 1.0), Potential(p, p, 10.0, 1.0)
        ds = difference_system(q1, q2, st_, g)
        v = ds.v.values
        vt = (v[2:] - v[:-2]) / (2 * g.dt)
        lap = discrete_laplacian(v[1:-1], g)
        res = -1j * vt - lap + q1.values * v[1:-1] - ds.fprime.values[1:-1]
        errs.append(np.max(np.abs(res[:, 1:-1, 1:-1])) / np.max(np.abs(vt)))
        hs.append(g.dt)
    assert 1.8 <= measured_order(hs, errs) <= 2.2


def test_energy_ratio_bounded_over_family():
    g = make_grid((0.0, 1.0), 4.0, 0.5, 17, 65, 17)
    XP, XN = g.spatial_mesh()
    ratios = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        amp = r.uniform(0.5, 2.0)
        u0 = InitialState(amp * (1 + r.uniform(0, 0.5) * np.sin(np.pi * XP) ** 2)
                          * _bump((XN - r.uniform(-0.5, 0.5)) / r.uniform(1.0, 2.0)), 0.0, 1.0)
        p = r.uniform(0.0, 1.0)
        q = potential_from(p, g)
        G = boundary_data_G(u0, p, g)
        u = solve_schrodinger(q, u0, G, g)
        z = np.sqrt(sum(l2_norm(ComplexField(g, a)) ** 2 for a in
                        (u.values, np.gradient(u.values, g.dt, axis=0))))
        h2 = np.sqrt(sum(spatial_l2_norm(a, g) ** 2 for a in
                         (u0.u0, discrete_laplacian(u0.u0, g))))
        ratios.append(z / (h2 + np.sqrt(np.sum(np.abs(G.values) ** 2) * g.dt * g.h_axial)))
    assert max(ratios) / min(ratios) < 10


def test_symmetrize_time_rules(grid):
    half = grid.half()
    r = np.random.default_rng(0)
    vals = r.normal(size=half.shape) + 1j * r.normal(size=half.shape)
    vals[0] = 1j * r.normal(size=half.spatial_shape)
    V = symmetrize_time(ComplexField(half, vals), grid)
    k0 = grid.zero_index()
    assert np.array_equal(V.values[k0], vals[0])
    assert np.allclose(V.values[::-1].real, -V.values.real)
    assert np.allclose(V.values[::-1].imag, V.values.imag)
    vals[0] = 1.0
    with pytest.raises(SymmetrizationError):
        symmetrize_time(ComplexField(half, vals), grid)


def test_potential_admissibility():
    g = make_grid((0.0, 1.0), 4.0, 1.0, 9, 33, 5)
    XP, XN = g.spatial_mesh()
    p = np.full(g.spatial_shape, 0.5)
    bad = Potential(p + 0.1 * np.cos(XN), p, 10.0, 1.0)
    with pytest.raises(AdmissibilityError):
        bad.check(g)
    with pytest.raises(AdmissibilityError):
        Potential(p + 0.1, p, 0.3, 1.0).check(g)
    d = np.sin(np.pi * XP) ** 3 * _bump(XN / 2.0)
    q1, q2 = Potential(p + d, p, 10.0, 1.0), Potential(p, p, 10.0, 1.0)
    with pytest.raises(AdmissibilityError):
        check_pair(q1, q2, g)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.0, 3.0))
def test_derivative_start_purely_imaginary_for_real_data(c):
    g = make_grid((0.0, 1.0), 4.0, 1.0, 9, 33, 5)
    XP, XN = g.spatial_mesh()
    st_ = InitialState((1 + c * _bump(XN)) * _bump(XN / 2), 0.0, 1.0)
    init = derivative_initial_state(potential_from(c, g), st_, g)
    assert np.max(np.abs(init.real)) == 0.0
