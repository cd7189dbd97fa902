import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavecarleman.axialfourier import (EXACT, EXACT_TOL, SECOND_ORDER, AxialSpectrum, apply_Ut,
                                       axial_dft, axial_idft, commutator_residuals, isometry_boundary,
                                       periodic_norm, reduce_dimension, residual_study,
                                       smooth_test_field, wavenumbers)
from wavecarleman.carleman import carleman_sides_cylinder
from wavecarleman.domain import BoundaryTrace, ComplexField, make_grid


@pytest.fixture(scope="module")
def g():
    return make_grid((0.0, 1.0), 4.0, 1.0, 17, 65, 33, symmetric_time=True)


def _random(g, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=g.shape) + 1j * r.normal(size=g.shape)
    v[..., -1] = v[..., 0]  # periodic closure
    return ComplexField(g, v)


def test_constant_in_xn_has_only_zero_mode(g):
    T, XP, _ = g.mesh()
    f = ComplexField(g, np.cos(T) * XP * (1 - XP) + 0j)
    spec = axial_dft(f)
    assert np.max(np.abs(spec.values[..., 1:])) < 1e-13 * np.max(np.abs(spec.values))


def test_round_trip_and_parseval(g):
    f = _random(g, 0)
    back = axial_idft(axial_dft(f))
    assert np.max(np.abs(back - f.values)) < 1e-13 * np.max(np.abs(f.values))
    spec = axial_dft(f)
    assert isinstance(spec, AxialSpectrum)
    assert spec.norm() == pytest.approx(periodic_norm(f.values[..., :-1], g), rel=1e-12)


def test_Ut_identity_single_mode_and_unitary(g):
    f = _random(g, 1)
    assert np.max(np.abs(apply_Ut(f, 0.0).values - f.values)) < 1e-13 * np.max(np.abs(f.values))
    k = wavenumbers(g)[3]
    _, XP, XN = g.mesh()
    mode = ComplexField(g, np.exp(1j * k * XN) * np.sin(np.pi * XP))
    out = apply_Ut(mode, 0.7).values
    assert np.allclose(out, np.exp(1j * 0.7 * k ** 2) * mode.values, atol=1e-12)
    for t in (0.3, -2.0, 11.0):
        a = periodic_norm(apply_Ut(f, t).values[..., :-1], g)
        assert a == pytest.approx(periodic_norm(f.values[..., :-1], g), rel=1e-12)


def test_reduce_dimension_xn_independent_is_identity(g):
    T, XP, _ = g.mesh()
    v = ComplexField(g, np.exp(-1j * T) * np.sin(np.pi * XP) * np.ones(g.shape))
    assert np.allclose(reduce_dimension(v).values, v.values, atol=1e-13)


def test_residual_report_classes_and_json(g, weights):
    res = commutator_residuals(smooth_test_field(g, 0), weights, 5.0, gamma_points=(0, 16))
    names = {r.identity_name for r in res}
    assert {"comm1", "comm2_dx", "comm2_weight", "co_w_grad", "co_M1", "co_M2", "Lnminonew",
            "co_L", "co_trace_0", "co_trace_16"} == names
    for r in res:
        assert set(r.to_json()) == {"identity_name", "norm_residual", "relative_residual", "tolerance_class"}
        if r.tolerance_class == EXACT:
            assert r.relative_residual <= EXACT_TOL
        else:
            assert r.tolerance_class == SECOND_ORDER and r.relative_residual < 0.5


def test_comm1_single_mode_is_time_error(weights):
    # for e^{i k x_n} e^{-i k^2 t}, U_t f is constant in t, so the residual is the
    # centered-difference error of d_t applied to e^{-i k^2 t}
    errs = []
    for nt in (33, 65, 129):
        g = make_grid((0.0, 1.0), 4.0, 1.0, 9, 33, nt, symmetric_time=True)
        T, XP, XN = g.mesh()
        k = wavenumbers(g)[2]
        f = ComplexField(g, np.sin(np.pi * XP) * np.exp(1j * k * XN - 1j * k * k * T))
        r = {x.identity_name: x for x in commutator_residuals(f, weights, 1.0)}["comm1"]
        errs.append(r.relative_residual)
    rate = np.log(errs[0] / errs[1]) / np.log(2 * 65 / 66)
    assert errs[-1] < errs[0] / 10 and rate > 1.8


def test_co_M1_at_zero_s_reduces_to_comm1(g, weights):
    res = {r.identity_name: r for r in commutator_residuals(smooth_test_field(g, 2), weights, 0.0)}
    assert res["co_M1"].norm_residual == pytest.approx(res["comm1"].norm_residual, rel=1e-10)
    assert res["co_M2"].norm_residual == 0.0


def test_second_order_identities_converge(weights):
    g = make_grid((0.0, 1.0), 4.0, 1.0, 17, 65, 65, symmetric_time=True)
    study = residual_study(g, weights, 5.0, seed=4)
    for name, e in study.items():
        assert e["pass"], (name, e)


def test_isometry_boundary(g):
    pts = (0, g.n_xprime - 1)
    zero = BoundaryTrace(g, pts, np.zeros((g.n_time, 2, g.n_axial)))
    assert isometry_boundary(zero) == (0.0, 0.0)
    r = np.random.default_rng(3)
    phi = BoundaryTrace(g, pts, r.normal(size=(g.n_time, 2, g.n_axial)) + 1j * r.normal(size=(g.n_time, 2, g.n_axial)))
    a, b = isometry_boundary(phi)
    assert a == pytest.approx(b, rel=1e-12)
    k = wavenumbers(g)[5]
    single = BoundaryTrace(g, pts, np.exp(1j * k * g.xn)[None, None, :] * np.ones((g.n_time, 2, 1)))
    a, b = isometry_boundary(single)
    assert abs(a - b) <= 1e-14 * b


def test_unitarity_transfers_to_cylinder_terms(g, weights):
    v = smooth_test_field(g, 5)
    w = reduce_dimension(v)
    for s in (2.0, 10.0):
        rv = carleman_sides_cylinder(v, None, weights, s)
        rw = carleman_sides_cylinder(w, None, weights, s)
        assert rw.lhs_s3 == pytest.approx(rv.lhs_s3, rel=1e-10)
        assert rw.lhs_grad == pytest.approx(rv.lhs_grad, rel=1e-10)
        assert rw.rhs_boundary == pytest.approx(rv.rhs_boundary, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), t=st.floats(-50, 50))
def test_Ut_group_property(seed, t):
    g = make_grid((0.0, 1.0), 2.0, 1.0, 5, 17, 5, symmetric_time=True)
    f = _random(g, seed)
    two = apply_Ut(apply_Ut(f, t), -t).values
    assert np.allclose(two, f.values, atol=1e-12 * np.max(np.abs(f.values)))
    assert periodic_norm(apply_Ut(f, t).values[..., :-1], g) == pytest.approx(
        periodic_norm(f.values[..., :-1], g), rel=1e-12)
