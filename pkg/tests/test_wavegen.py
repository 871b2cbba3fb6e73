import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from benney_lab import polyfam, solver, wavegen
from benney_lab.solver import Grid1D, SimConfig
from benney_lab.wavegen import Admissibility, u1

H = sp.Symbol("H")
p = sp.Symbol("p")


def exprs(polys):
    return [sp.expand(P.as_expr()) for P in polys]


def test_n3_still_components():
    c3 = sp.Rational(2, 7)
    got = exprs(wavegen.travelwave_components(3, 0, (0, c3)))
    assert got == [u1, 0, u1 ** 2 + c3]


def test_n3_still_is_hamiltonian_square_plus_constant():
    polys = wavegen.travelwave_components(3, 0, (0, sp.Rational(1, 3)))
    F = wavegen.lax_polynomial(3, polys)
    # hand expansion of H^2 + 1/3 with H = p^2/2 + u1
    assert sp.expand(F - ((p ** 2 / 2 + u1) ** 2 + sp.Rational(1, 3))) == 0


def test_n3_moving_components():
    got = exprs(wavegen.travelwave_components(3, 1))
    assert got == [u1, u1, u1 + u1 ** 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.fractions(-3, 3, max_denominator=5),
       st.lists(st.fractions(-2, 2, max_denominator=4), max_size=6))
def test_chain_is_satisfied_identically(n, mu, consts):
    consts = consts[: n - 1]
    polys = wavegen.travelwave_components(n, mu, consts)
    for r in wavegen.chain_residuals(n, mu, polys):
        assert r.is_zero


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.fractions(-3, 3, max_denominator=5))
def test_last_chain_equation_is_the_eigen_constraint(n, mu):
    polys = wavegen.travelwave_components(n, mu)
    diff = wavegen.eigen_constraint(n, mu, polys) - wavegen.last_chain_equation(n, mu, polys)
    assert diff.is_zero


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.fractions(-2, 2, max_denominator=3),
       st.fractions(-1, 1, max_denominator=4))
def test_constraint_equals_derivative_at_mu(n, mu, u_val):
    # independent oracle: evaluate F_p(mu) numerically from sampled components
    polys = wavegen.travelwave_components(n, mu)
    U = np.array([float(P.eval(u_val)) for P in polys])
    dc = polyfam.LaxPoly(U).derivative_coeffs()
    cons = float(wavegen.eigen_constraint(n, mu, polys).eval(u_val))
    assert np.polyval(dc, float(mu)) == pytest.approx(cons, abs=1e-9)


def test_still_wave_constraint_vanishes():
    spec = wavegen.travelwave(3, 0)
    assert spec.constraint.is_zero
    assert spec.admissibility is Admissibility.FREE
    assert spec.hamiltonian_form.as_expr() == H ** 2


def test_moving_wave_only_constants():
    spec = wavegen.travelwave(3, 1)
    assert spec.constraint.degree() >= 1
    assert spec.admissibility is Admissibility.CONSTANTS_ONLY
    with pytest.raises(wavegen.NonconstantProfileError):
        spec.components(np.linspace(0, 1, 8))
    assert spec.components(np.full(8, -1 / 3)).shape == (3, 8)


def test_even_order_still_wave_is_degenerate():
    spec = wavegen.travelwave(2, 0)
    assert spec.constraint.as_expr() == u1
    assert any("degenerate" in note for note in spec.notes)


@pytest.mark.parametrize("n,leading", [(5, sp.Rational(4, 3)), (7, 2)])
def test_higher_odd_orders_are_hamiltonian_powers(n, leading):
    spec = wavegen.travelwave(n, 0)
    m = (n + 1) // 2
    assert sp.expand(spec.hamiltonian_form.as_expr() - leading * H ** m) == 0


def test_non_hamiltonian_returns_none():
    polys = wavegen.travelwave_components(3, 1)
    assert wavegen.as_hamiltonian_polynomial(3, polys) is None


# -- autonomous states -----------------------------------------------------

def test_autonomous_n3_matches_h_squared():
    g = Grid1D(32)
    u = 0.1 * np.cos(2 * np.pi * g.x)
    tr = wavegen.autonomous_from_potential(3, u, grid=g)
    assert np.allclose(tr.frames[0], np.stack([u, 0 * u, u * u]), atol=0, rtol=1e-15)


def test_autonomous_n5_leading_coefficient():
    u = np.linspace(-0.3, 0.2, 16)
    U = wavegen.autonomous_from_potential(5, u).frames[0]
    # (8/6)(p^2/2 + u)^3 expanded: p^4 coefficient is u, p^2 is 2u^2, p^0 is 4u^3/3
    assert U == pytest.approx(np.stack([u, 0 * u, 2 * u ** 2, 0 * u, 4 * u ** 3 / 3]))


def test_autonomous_lower_terms_shift_u1():
    u = np.linspace(-0.3, 0.2, 16)
    U = wavegen.autonomous_from_potential(3, u, lower_coeffs=(0.5, 0.25)).frames[0]
    # adds 0.5 + 0.25 H: p^2 coefficient gains 1/8, constant gains 0.5 + 0.25 u
    assert U[0] == pytest.approx(u + 0.125)
    assert U[2] == pytest.approx(u * u + 0.5 + 0.25 * u)


def test_autonomous_constant_potential_constant_state():
    U = wavegen.autonomous_from_potential(3, np.full(16, -0.2)).frames[0]
    assert np.ptp(U, axis=1).max() == 0.0


def test_autonomous_even_n_rejected():
    with pytest.raises(ValueError):
        wavegen.autonomous_from_potential(4, np.zeros(16))


def test_autonomous_exact_lax_residual():
    # symbolic oracle: F_t = 0 and p F_x - u_x F_p vanishes for F = H^2
    x = sp.Symbol("x")
    u = sp.Function("u")(x)
    F = (p ** 2 / 2 + u) ** 2
    assert sp.simplify(p * sp.diff(F, x) - sp.diff(u, x) * sp.diff(F, p)) == 0


# -- verify_traveling ------------------------------------------------------

def test_verify_traveling_constant_state():
    g = Grid1D(32)
    frames = np.full((4, 3, 32), 0.2)
    tr = solver.Trajectory(grid=g, t=np.arange(4.0), frames=frames, names=("u1", "u2", "u3"))
    assert wavegen.verify_traveling(tr, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_verify_traveling_stationary_run():
    g = Grid1D(128)
    u = -0.1 + 0.05 * np.cos(2 * np.pi * g.x)
    U0 = wavegen.autonomous_from_potential(3, u, grid=g).frames[0]
    tr = solver.simulate_quasilinear(U0, g, SimConfig(tmax=0.5, frame_dt=0.1))
    assert wavegen.verify_traveling(tr, 0.0) < 1e-4


def test_verify_traveling_exact_shift():
    g = Grid1D(64)
    t = np.linspace(0, 0.5, 6)
    frames = np.stack([np.stack([np.sin(2 * np.pi * (g.x - 0.3 * tk))] * 2) for tk in t])
    tr = solver.Trajectory(grid=g, t=t, frames=frames, names=("w", "v"))
    assert wavegen.verify_traveling(tr, 0.3) < 1e-12


def test_verify_traveling_negative_control():
    g = Grid1D(64)
    tr = solver.simulate_2x2(1.0 + 0.5 * np.sin(2 * np.pi * g.x), np.full(64, 0.5), g,
                             SimConfig(tmax=0.5, frame_dt=0.1))
    assert wavegen.verify_traveling(tr, 0.0) > 0.1
