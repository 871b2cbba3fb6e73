import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from benney_lab import polyfam, reduction, solver, spectral
from benney_lab.polyfam import LaxPoly
from benney_lab.reduction import ReducedState

wv = st.floats(-2.0, 2.0, allow_nan=False)


def test_lift_origin():
    assert np.array_equal(reduction.lift((0.0, 0.0)).coeffs, np.zeros(4))


def test_lift_diagonal_state():
    # (1/5)(p - 1)^4 (p + 4) expanded by hand
    assert reduction.lift((0.0, 1.0)).coeffs == pytest.approx([-2.0, 4.0, -3.0, 0.8])


@given(wv, wv)
def test_closed_form_lift_matches_convolution(w, v):
    U = reduction.lift_coeffs(w, v)
    ref = reduction.lift(ReducedState(w, v)).coeffs
    assert U == pytest.approx(ref, abs=1e-12 * (1 + np.abs(ref).max()))
    assert U[0] == pytest.approx(-2.0 * (v * v + w * w), abs=1e-13)


@settings(max_examples=60)
@given(wv, wv)
def test_lift_spectrum_contains_f_and_g(w, v):
    assume(abs(w) > 1e-2 or abs(v) > 1e-2)
    s = ReducedState(w, v)
    fd = reduction.FactorData.from_state(s)
    F = reduction.lift(s)
    dc = F.derivative_coeffs()
    scale = 1 + max(abs(fd.f), abs(fd.g)) ** 4
    assert abs(np.polyval(dc, fd.f)) <= 1e-10 * scale
    assert abs(np.polyval(dc, fd.g)) <= 1e-10 * scale
    # remaining eigenvalues are the reduced ones; skip near-coincident spectra
    expected = np.sort([fd.f, fd.g, *reduction.eigs2(s)])
    assume(np.min(np.diff(expected)) > 1e-2)
    dense = np.sort(np.linalg.eigvals(spectral.build_A(F.coeffs)).real)
    assert dense == pytest.approx(expected, abs=1e-6 * (1 + np.abs(expected).max()))


def test_factor_round_trip():
    s = ReducedState(0.7, -0.3)
    back = reduction.FactorData.from_state(s).to_state()
    assert (back.w, back.v) == pytest.approx((0.7, -0.3))


def test_flux_examples():
    assert reduction.flux((1.0, 1.0)) == pytest.approx((1.0, -1.0))
    assert reduction.flux((2.0, 0.0)) == pytest.approx((0.0, 2.0))
    assert reduction.flux((0.0, 2.0)) == pytest.approx((0.0, -6.0))


@given(wv, wv)
def test_flux_jacobian_is_reduced_matrix(w, v):
    h = 1e-6
    J = np.empty((2, 2))
    for j, e in enumerate(np.eye(2)):
        plus = np.array(reduction.flux((w + h * e[0], v + h * e[1])))
        minus = np.array(reduction.flux((w - h * e[0], v - h * e[1])))
        J[:, j] = (plus - minus) / (2 * h)
    assert J == pytest.approx(reduction.reduced_matrix((w, v)), abs=1e-8)


def test_eigs2_examples():
    assert reduction.eigs2((3.0, 2.0)) == pytest.approx((3.0, -7.0))
    assert reduction.eigs2((0.0, 1.0)) == pytest.approx((1.0, -3.0))
    assert reduction.eigs2((0.0, 0.0)) == (0.0, 0.0)


@given(wv, wv)
def test_eigs2_matches_dense(w, v):
    dense = np.linalg.eigvalsh(reduction.reduced_matrix((w, v)))
    l1, l2 = reduction.eigs2((w, v))
    assert (l2, l1) == pytest.approx(tuple(dense), abs=1e-12)


def test_eigvec1_examples():
    assert reduction.eigvec1((3.0, 2.0)) == pytest.approx([3.0, 1.0])
    assert reduction.eigvec1((1.0, 0.0)) == pytest.approx([1.0, 1.0])


def test_eigvec1_special_half_line():
    xi, special = reduction.eigvec1((0.0, 0.5), flag=True)
    assert special
    M = reduction.reduced_matrix((0.0, 0.5))
    assert np.abs(M @ xi - reduction.eigs2((0.0, 0.5))[0] * xi).max() == 0.0


def test_eigvec1_origin_raises():
    with pytest.raises(reduction.OriginError):
        reduction.eigvec1((0.0, 0.0))


@given(wv, wv)
def test_eigvec1_null_space(w, v):
    assume(w != 0.0 or v != 0.0)
    xi = reduction.eigvec1((w, v))
    l1 = reduction.eigs2((w, v))[0]
    M = reduction.reduced_matrix((w, v))
    assert np.abs(M @ xi - l1 * xi).max() <= 1e-12 * (1 + np.abs(xi).max() * (1 + abs(l1)))


def test_nonlinearity_examples():
    assert reduction.nonlinearity1((3.0, 2.0)) == pytest.approx(2.4)
    assert reduction.nonlinearity1((1.5, 0.0)) == 0.0
    with pytest.raises(reduction.OriginError):
        reduction.nonlinearity1((0.0, 0.0))


@settings(max_examples=100)
@given(wv, wv)
def test_nonlinearity_matches_finite_difference(w, v):
    assume(abs(v) >= 1e-3)
    s = ReducedState(w, v)
    exact = reduction.nonlinearity1(s)
    assert reduction.nonlinearity1_fd(s) == pytest.approx(exact, rel=1e-6)


@settings(max_examples=100)
@given(wv, wv)
def test_nonlinearity_sign_is_sign_v(w, v):
    assume(abs(w) > 1e-150)       # w**2 must not underflow
    assert np.sign(reduction.nonlinearity1((w, v))) == np.sign(v)


@settings(max_examples=60)
@given(wv, wv)
def test_second_family_symmetry(w, v):
    # lambda2 at (w, v) is -lambda1 at (w, -v); its derivative along its own
    # eigenvector equals minus the first-family value there
    assume(abs(v) > 1e-2 and abs(w) > 1e-2)
    s = ReducedState(w, v)
    lam2, vec = np.linalg.eigh(reduction.reduced_matrix((w, v)))
    xi2 = vec[:, 0]
    mirrored = np.array([xi2[0], -xi2[1]])
    # align with the first-family eigenvector at the mirrored state
    ref = reduction.eigvec1((w, -v))
    mirrored *= np.dot(ref, mirrored) / np.dot(mirrored, mirrored)
    d2 = spectral.directional_derivative(
        lambda x: float(np.linalg.eigvalsh(reduction.reduced_matrix(x))[0]),
        s.as_array(), np.array([mirrored[0], -mirrored[1]]), 1e-5)
    assert d2 == pytest.approx(-reduction.nonlinearity1((w, -v)), rel=1e-5, abs=1e-8)


# -- f, g residual ---------------------------------------------------------

def test_fg_residual_constant_state():
    frames = np.ones((5, 2, 32)) * np.array([0.7, 0.2])[None, :, None]
    res = reduction.fg_residual(np.linspace(0, 1, 5), frames, 1 / 32)
    assert res.sup == 0.0
    assert res.u_mismatch < 1e-15


def test_fg_residual_refinement():
    sups = []
    for N in (256, 512):
        g = solver.Grid1D(N)
        w0 = 1.0 + 0.1 * np.sin(2 * np.pi * g.x)
        v0 = 0.5 + 0.05 * np.cos(2 * np.pi * g.x)
        tr = solver.simulate_2x2(w0, v0, g, solver.SimConfig(tmax=0.1, frame_dt=g.dx))
        sups.append(reduction.fg_residual(tr.t, tr.frames, g.dx).sup)
    ratio = sups[0] / sups[1]
    assert 1.6 < ratio < 2.5        # first-order scheme


def test_lift_jacobian_first_row():
    s = ReducedState(0.4, -0.6)
    J = reduction.lift_jacobian(s)
    assert J[0] == pytest.approx([-4 * s.w, -4 * s.v], abs=1e-8)


def test_lifted_critical_values_at_f_g_vanish():
    s = ReducedState(0.4, 0.3)
    fd = reduction.FactorData.from_state(s)
    F = reduction.lift(s)
    assert abs(polyfam.eval_poly(F, fd.f)) < 1e-14
    assert abs(polyfam.eval_poly(F, fd.g)) < 1e-14
    assert isinstance(F, LaxPoly)
