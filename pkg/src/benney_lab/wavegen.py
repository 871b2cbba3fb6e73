"""Exact traveling-wave and autonomous states.

For ``U = U(x - mu t)`` the profile derivative is an eigenvector of A(U), which
gives the chain

    mu u_k' = u_{k+1}' - (n - k + 1) u_{k-1} u_1'      (k = 1 .. n-1, u_0 = 0)

Integrating it in u_1 turns every component into a polynomial in u_1 with
rational coefficients. The remaining condition ``F_p(mu) = 0`` is then a
polynomial in u_1 as well; unless it vanishes identically the profile must be
constant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy as sp

from .solver import Grid1D, Trajectory

u1 = sp.Symbol("u1")
_p = sp.Symbol("p")
_H = sp.Symbol("H")


class Admissibility(str, enum.Enum):
    FREE = "free"                       # constraint vanishes identically
    CONSTANTS_ONLY = "constants_only"   # constraint pins u1


class NonconstantProfileError(ValueError):
    pass


def _rational(x) -> sp.Rational:
    if isinstance(x, sp.Basic):
        return sp.nsimplify(x, rational=True)
    return sp.Rational(Fraction(x) if not isinstance(x, str) else Fraction(x))


def travelwave_components(n: int, mu, constants: Sequence | None = None) -> list[sp.Poly]:
    """Component polynomials u_1 .. u_n in the variable u1.

    ``constants`` holds (c_2, ..., c_n); missing entries default to 0.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    mu = _rational(mu)
    c = [0] * (n - 1) if constants is None else list(constants)
    if len(c) > n - 1:
        raise ValueError(f"expected at most {n - 1} integration constants")
    c = [_rational(ci) for ci in c] + [sp.Integer(0)] * (n - 1 - len(c))
    polys = [sp.Poly(u1, u1, domain="QQ"), sp.Poly(mu * u1 + c[0], u1, domain="QQ")]
    for k in range(2, n):
        prev = polys[k - 2]                      # u_{k-1}
        nxt = mu * polys[k - 1] + (n - k + 1) * prev.integrate() + sp.Poly(c[k - 1], u1, domain="QQ")
        polys.append(sp.Poly(nxt, u1, domain="QQ"))
    return polys[:n]


def chain_residuals(n: int, mu, polys: Sequence[sp.Poly]) -> list[sp.Poly]:
    """mu u_k' - u_{k+1}' + (n-k+1) u_{k-1} for k = 1..n-1 (derivatives in u1)."""
    mu = _rational(mu)
    zero = sp.Poly(0, u1, domain="QQ")
    out = []
    for k in range(1, n):
        prev = polys[k - 2] if k >= 2 else zero
        out.append(mu * polys[k - 1].diff(u1) - polys[k].diff(u1) + (n - k + 1) * prev)
    return out


def eigen_constraint(n: int, mu, polys: Sequence[sp.Poly]) -> sp.Poly:
    """F_p(mu) with the component polynomials substituted."""
    mu = _rational(mu)
    expr = sp.Poly(mu ** n, u1, domain="QQ")
    for k in range(1, n):
        expr += (n - k) * mu ** (n - k - 1) * polys[k - 1]
    return sp.Poly(expr, u1, domain="QQ")


def last_chain_equation(n: int, mu, polys: Sequence[sp.Poly]) -> sp.Poly:
    """mu u_n' + u_{n-1}: the final ODE of the chain, which must match the constraint."""
    mu = _rational(mu)
    return sp.Poly(mu * polys[n - 1].diff(u1) + polys[n - 2], u1, domain="QQ")


def lax_polynomial(n: int, polys: Sequence[sp.Poly]) -> sp.Expr:
    """F(p) as an expression in p and u1."""
    F = _p ** (n + 1) / (n + 1)
    for k in range(1, n + 1):
        F += polys[k - 1].as_expr() * _p ** (n - k)
    return sp.expand(F)


def as_hamiltonian_polynomial(n: int, polys: Sequence[sp.Poly]) -> sp.Poly | None:
    """Write F as G(H) with H = p**2/2 + u1, or return None if impossible."""
    F = sp.Poly(lax_polynomial(n, polys), _p)
    s = sp.Symbol("s")
    G = 0
    for (deg,), coeff in F.terms():
        if deg % 2:
            return None
        G += coeff * (2 * s) ** (deg // 2)
    G = sp.expand(G.subs(s, _H - u1))
    if sp.Poly(G, _H, u1).degree(u1) > 0:
        return None
    return sp.Poly(G, _H, domain="QQ")


@dataclass
class TravelWaveSpec:
    n: int
    mu: sp.Rational
    constants: list
    component_polys: list[sp.Poly]
    constraint: sp.Poly
    admissibility: Admissibility
    hamiltonian_form: sp.Poly | None = None
    u1_profile: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    def components(self, u1_samples) -> np.ndarray:
        """Evaluate all components on sampled u1 values, shape (n, N).

        Raises
        ------
        NonconstantProfileError
            If only constant profiles are admissible and the samples vary.
        """
        s = np.asarray(u1_samples, float)
        if self.admissibility is Admissibility.CONSTANTS_ONLY and np.ptp(s) > 0:
            raise NonconstantProfileError(
                f"mu={self.mu}: constraint {self.constraint.as_expr()} forces u1 constant")
        out = np.empty((self.n, s.size))
        for k, P in enumerate(self.component_polys):
            coeffs = [float(c) for c in P.all_coeffs()]
            out[k] = np.polyval(coeffs, s)
        self.u1_profile = s
        return out


def travelwave(n: int, mu=0, constants: Sequence | None = None) -> TravelWaveSpec:
    """Component polynomials plus the dichotomy verdict for wave speed ``mu``."""
    polys = travelwave_components(n, mu, constants)
    cons = eigen_constraint(n, mu, polys)
    notes = []
    if cons.is_zero:
        adm = Admissibility.FREE
    else:
        adm = Admissibility.CONSTANTS_ONLY
        if cons.degree() <= 0:
            notes.append("constraint is a nonzero constant: mu is never an eigenvalue")
        else:
            notes.append("constraint is a nonconstant polynomial in u1")
        if _rational(mu) == 0:
            notes.append("degenerate case: mu = 0 yet the constraint does not vanish")
    spec = TravelWaveSpec(n=n, mu=_rational(mu),
                          constants=[_rational(c) for c in (constants or [])],
                          component_polys=polys, constraint=cons, admissibility=adm,
                          notes=notes)
    if adm is Admissibility.FREE:
        spec.hamiltonian_form = as_hamiltonian_polynomial(n, polys)
    return spec


def autonomous_from_potential(n: int, u_samples, lower_coeffs: Sequence[float] = (),
                              grid: Grid1D | None = None) -> Trajectory:
    """Stationary state whose Lax polynomial is a polynomial in H = p^2/2 + u.

    F = (2**m/(n+1)) H**m + sum_{k<m} c_k H**k with m = (n+1)/2; ``lower_coeffs``
    lists c_0, c_1, ... . Returns a single-frame trajectory (t = 0).
    """
    if n % 2 == 0:
        raise ValueError("autonomous construction needs odd n (even powers of p only)")
    m = (n + 1) // 2
    if len(lower_coeffs) > m:
        raise ValueError(f"at most {m} lower-order coefficients for n={n}")
    u = np.asarray(u_samples, float)
    coeffs = [0.0] * m + [2.0 ** m / (n + 1)]
    for k, ck in enumerate(lower_coeffs):
        coeffs[k] = float(ck)
    U = np.zeros((n, u.size))
    # H**k = sum_j C(k, j) (p^2/2)^j u^(k-j); p^(2j) is the coefficient u_{n-2j}
    for k, ck in enumerate(coeffs):
        if ck == 0.0:
            continue
        for j in range(k + 1):
            level = n - 2 * j
            if level < 1:
                continue
            U[level - 1] += ck * math.comb(k, j) * 0.5 ** j * u ** (k - j)
    grid = grid or Grid1D(u.size)
    return Trajectory(grid=grid, t=np.array([0.0]), frames=U[None], names=tuple(
        f"u{k}" for k in range(1, n + 1)), metadata={"source": "autonomous", "n": n})


def _fourier_shift(a: np.ndarray, shift_cells: float) -> np.ndarray:
    N = a.shape[-1]
    k = np.fft.rfftfreq(N, d=1.0 / N)
    return np.fft.irfft(np.fft.rfft(a, axis=-1) * np.exp(-2j * np.pi * k * shift_cells / N),
                        n=N, axis=-1)


def verify_traveling(traj: Trajectory, mu: float) -> float:
    """max_t || U(t, .) - U(0, . - mu t) ||_inf, shifts done spectrally."""
    U0 = traj.frames[0]
    drift = 0.0
    for tk, F in zip(traj.t, traj.frames):
        shift = mu * tk / traj.grid.dx
        ref = U0 if shift == 0 else _fourier_shift(U0, shift)
        drift = max(drift, float(np.abs(F - ref).max()))
    return drift
