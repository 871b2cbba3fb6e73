import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linear_sum_assignment

from benney_lab import polyfam, reduction, spectral, wavegen
from benney_lab.polyfam import LaxPoly
from benney_lab.spectral import Regime

coeff = st.floats(-2.0, 2.0, allow_nan=False)
states = st.integers(2, 8).flatmap(lambda n: arrays(float, n, elements=coeff))


def test_build_A_n3():
    u1, u2, u3 = 0.7, -1.1, 0.4
    expected = np.array([[0, 1, 0], [-2 * u1, 0, 1], [-u2, 0, 0]])
    assert spectral.build_A([u1, u2, u3]) == pytest.approx(expected)


def test_build_A_n2():
    assert spectral.build_A([0.3, 5.0]) == pytest.approx(np.array([[0, 1], [-0.3, 0]]))


def test_build_A_zero_is_shift():
    A = spectral.build_A(np.zeros(4))
    assert np.array_equal(A, np.eye(4, k=1))


def test_apply_A_matches_matrix_product():
    rng = np.random.default_rng(3)
    U, Ux = rng.normal(size=(4, 9)), rng.normal(size=(4, 9))
    got = spectral.apply_A(U, Ux)
    for j in range(9):
        assert got[:, j] == pytest.approx(spectral.build_A(U[:, j]) @ Ux[:, j])


def test_charpoly_witness():
    # cofactor expansion by hand: p^3 + 2 u1 p + u2 = p^3 - 3p + 2
    A = spectral.build_A([-1.5, 2.0, 0.0])
    assert spectral.charpoly_coeffs(A) == pytest.approx([1, 0, -3, 2])
    assert np.abs(spectral.charpoly_residual([-1.5, 2.0, 0.0])).max() == 0.0


def test_charpoly_zero():
    assert np.abs(spectral.charpoly_residual(np.zeros(5))).max() == 0.0


@settings(max_examples=200)
@given(states)
def test_charpoly_matches_numpy_poly(U):
    # independent oracle: numpy builds the characteristic polynomial from eigenvalues
    ref = np.poly(spectral.build_A(U))
    got = LaxPoly(U).derivative_coeffs()
    assert got == pytest.approx(ref.real, abs=1e-8 * max(1.0, np.abs(ref).max()))


@settings(max_examples=100)
@given(states)
def test_dense_eigenvalues_equal_critical_points(U):
    F = LaxPoly(U)
    assume(polyfam.min_root_gap(F) > 1e-3)
    dense = np.linalg.eigvals(spectral.build_A(U))
    crit = polyfam.critical_points(F).expanded()
    rows, cols = linear_sum_assignment(np.abs(dense[:, None] - crit[None, :]))
    assert crit[cols] == pytest.approx(dense[rows], abs=1e-7 * (1 + np.abs(dense).max()))


def test_eigenvector_satisfies_eigen_equation():
    U = np.array([-1.0, 0.3, 0.2])
    for lam in polyfam.critical_points(LaxPoly(U)).points:
        xi = spectral.eigenvector(U, lam)
        assert np.abs(spectral.build_A(U) @ xi - lam * xi).max() < 1e-12


def test_normalize_convention():
    xi = spectral.normalize(np.array([0.0, -3.0, 4.0]))
    assert np.linalg.norm(xi) == pytest.approx(1.0)
    assert xi[1] > 0


# -- classification --------------------------------------------------------

def test_classify_one_real():
    assert spectral.classify_state([1.0, 0.0, 0.0]).regime is Regime.ONE_REAL


def test_classify_double_root_degenerate():
    assert spectral.classify_state([-1.5, 2.0, 0.0]).regime is Regime.DEGENERATE_REAL


def test_classify_zero_degenerate():
    assert spectral.classify_state(np.zeros(3)).regime is Regime.DEGENERATE_REAL


def test_classify_strictly_hyperbolic():
    assert spectral.classify_state([-1.0, 0.3, 0.0]).regime is Regime.STRICTLY_HYPERBOLIC


def test_classify_even_n_complex_is_mixed():
    assert spectral.classify_state([1.0, 0.0]).regime is Regime.MIXED_OTHER


def test_classify_borderline_flag():
    # roots 1, 1 + 5e-8, -2 - 5e-8: gap within 10x of the default gap tolerance
    dc = np.poly([1.0, 1.0 + 5e-8, -2.0 - 5e-8])
    data = spectral.classify_state([dc[2] / 2, dc[3], 0.0], cluster_tol=1e-9)
    assert data.borderline


def test_classify_one_real_eigenvector():
    data = spectral.classify_state([1.0, 0.0, 0.0])
    mu, xi = data.real_eigen
    assert mu == pytest.approx(0.0, abs=1e-12)
    assert np.abs(spectral.build_A([1.0, 0.0, 0.0]) @ xi - mu * xi).max() < 1e-12


def test_gap_tol_must_be_positive():
    with pytest.raises(ValueError):
        spectral.classify_state([1.0, 0.0, 0.0], gap_tol=0.0)


# -- genuine nonlinearity --------------------------------------------------

def test_reduced_specialization_reproduces_closed_form():
    s = reduction.ReducedState(3.0, 2.0)
    got = spectral.matrix_nonlinearity(reduction.reduced_matrix, s.as_array(), 0,
                                       direction=reduction.eigvec1(s))
    assert got == pytest.approx(2.4, rel=1e-8)


def test_reduced_specialization_vanishes_at_v0():
    s = reduction.ReducedState(1.0, 0.0)
    got = spectral.matrix_nonlinearity(reduction.reduced_matrix, s.as_array(), 0,
                                       direction=reduction.eigvec1(s))
    assert got == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_reduced_nonlinearity_sign(w, v):
    assume(abs(v) > 1e-2 and abs(w) > 1e-3)
    s = reduction.ReducedState(w, v)
    got = spectral.matrix_nonlinearity(reduction.reduced_matrix, s.as_array(), 0,
                                       direction=reduction.eigvec1(s))
    assert np.sign(got) == np.sign(v)


def test_nonlinearity_flips_with_eigenvector_sign():
    U = np.array([-1.0, 0.3, 0.2])
    base = spectral.genuine_nonlinearity(U, 0)
    lam = polyfam.critical_points(LaxPoly(U)).expanded()[0].real
    xi = spectral.normalize(spectral.eigenvector(U, lam).real)
    assert spectral.genuine_nonlinearity(U, 0, direction=-xi) == pytest.approx(-base, rel=1e-8)
    assert spectral.genuine_nonlinearity(U, 0, direction=2 * xi) == pytest.approx(2 * base,
                                                                                  rel=1e-6)


def test_nonlinearity_against_dense_eigensolver():
    U = np.array([-1.0, 0.3, 0.2])
    got = spectral.genuine_nonlinearity(U, 2)
    alt = spectral.matrix_nonlinearity(spectral.build_A, U, 0)
    assert got == pytest.approx(alt, rel=1e-6)


def test_nonlinearity_rejects_complex_eigenvalue():
    with pytest.raises(spectral.NonSimpleEigenvalueError):
        spectral.genuine_nonlinearity([1.0, 0.0, 0.0], 2)


def test_nonlinearity_rejects_double_eigenvalue():
    with pytest.raises(spectral.NonSimpleEigenvalueError):
        spectral.genuine_nonlinearity([-1.5, 2.0, 0.0], 1)


# -- riemann fields --------------------------------------------------------

def test_constant_state_constant_fields():
    S = np.repeat(np.array([[-1.0], [0.3], [0.2]]), 8, axis=1)
    rf = spectral.riemann_fields(np.stack([S, S]))
    assert rf.consistent
    assert np.abs(rf.values - rf.values[0, 0]).max() < 1e-12


def test_stationary_wave_fields_constant_in_time():
    # mu = 0 profile from the generator is stationary, so r_i(t, x) = r_i(0, x)
    spec = wavegen.travelwave(3, 0)
    x = np.linspace(0, 1, 16, endpoint=False)
    U = spec.components(-0.5 + 0.1 * np.cos(2 * np.pi * x))
    rf = spectral.riemann_fields(np.stack([U, U, U]))
    assert np.abs(rf.values - rf.values[0]).max() < 1e-12


def test_regime_change_strict_raises():
    S = np.array([[1.0, -1.0], [0.0, 0.3], [0.0, 0.0]])
    with pytest.raises(spectral.RegimeChangeError) as info:
        spectral.riemann_fields(S, strict=True)
    assert info.value.cells


def test_regime_change_partitions():
    S = np.array([[1.0, 1.0, -1.0], [0.0, 0.0, 0.3], [0.0, 0.0, 0.0]])
    rf = spectral.riemann_fields(S)
    assert not rf.consistent
    assert list(rf.regions[0]) == [0, 0, 1]


def test_one_real_fields_have_real_value():
    S = np.repeat(np.array([[1.0], [0.1], [0.0]]), 4, axis=1)
    rf = spectral.riemann_fields(S)
    cs = polyfam.critical_points(LaxPoly(S[:, 0]))
    assert rf.real_values[0] == pytest.approx([cs.real_value] * 4)
