"""The two-component conservative reduction of the n = 4 system.

    w_t + (w v)_x = 0
    v_t + (w**2/2 - 3 v**2/2)_x = 0

A state (w, v) lifts to the quintic Lax polynomial

    F = (p - f)**2 (p - g)**2 (p - a) / 5,
    f = v + sqrt(5) w,  g = v - sqrt(5) w,  a = -4 v,

whose coefficient vector solves the n = 4 quasi-linear system whenever
(w, v) solves the pair above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polyfam import LaxPoly
from .spectral import directional_derivative

SQRT5 = math.sqrt(5.0)


class OriginError(ValueError):
    """The reduced system degenerates at (w, v) = (0, 0)."""


@dataclass(frozen=True)
class ReducedState:
    w: float
    v: float

    @property
    def R(self) -> float:
        return math.hypot(2.0 * self.v, self.w)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.v])


@dataclass(frozen=True)
class FactorData:
    f: float
    g: float
    a: float
    h: float
    q: float

    @classmethod
    def from_state(cls, s: ReducedState) -> "FactorData":
        f = s.v + SQRT5 * s.w
        g = s.v - SQRT5 * s.w
        return cls(f=f, g=g, a=-2.0 * (f + g), h=0.5 * (f - g), q=0.5 * (f + g))

    def to_state(self) -> ReducedState:
        return ReducedState(w=self.h / SQRT5, v=self.q)


def _state(s) -> ReducedState:
    return s if isinstance(s, ReducedState) else ReducedState(*map(float, s))


def lift_coeffs(w, v) -> np.ndarray:
    """Vectorized lift: arrays w, v of equal shape -> (4, ...) coefficients."""
    w = np.asarray(w, float)
    v = np.asarray(v, float)
    # (p-f)(p-g) = p^2 - 2v p + (v^2 - 5 w^2) expanded in closed form
    s1 = 2.0 * v
    s2 = v * v - 5.0 * w * w
    a = -4.0 * v
    # square: p^4 - 2 s1 p^3 + (s1^2 + 2 s2) p^2 - 2 s1 s2 p + s2^2
    c3 = -2.0 * s1
    c2 = s1 * s1 + 2.0 * s2
    c1 = -2.0 * s1 * s2
    c0 = s2 * s2
    # times (p - a), drop the leading p^5 and the vanishing p^4 term, scale by 1/5
    u1 = (c2 - a * c3) / 5.0
    u2 = (c1 - a * c2) / 5.0
    u3 = (c0 - a * c1) / 5.0
    u4 = (-a * c0) / 5.0
    return np.stack([u1, u2, u3, u4])


def lift(s) -> LaxPoly:
    """Coefficient vector (u1..u4) of the quintic attached to (w, v)."""
    s = _state(s)
    fd = FactorData.from_state(s)
    # product of the linear factors by direct convolution
    poly = np.array([1.0])
    for root in (fd.f, fd.f, fd.g, fd.g, fd.a):
        poly = np.convolve(poly, [1.0, -root])
    coeffs = poly / 5.0
    return LaxPoly(coeffs[2:])


def lift_jacobian(s, h: float = 1e-6) -> np.ndarray:
    """d(u1..u4)/d(w, v) by central differences of the closed-form lift."""
    s = _state(s)
    J = np.empty((4, 2))
    for j, e in enumerate(np.eye(2)):
        plus = lift_coeffs(s.w + h * e[0], s.v + h * e[1])
        minus = lift_coeffs(s.w - h * e[0], s.v - h * e[1])
        J[:, j] = (plus - minus) / (2 * h)
    return J


def flux(s) -> tuple[float, float]:
    s = _state(s)
    return s.w * s.v, 0.5 * s.w ** 2 - 1.5 * s.v ** 2


def flux_arrays(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.stack([w * v, 0.5 * w * w - 1.5 * v * v])


def reduced_matrix(x) -> np.ndarray:
    """Flux Jacobian [[v, w], [w, -3v]] at x = (w, v)."""
    w, v = float(x[0]), float(x[1])
    return np.array([[v, w], [w, -3.0 * v]])


def eigs2(s) -> tuple[float, float]:
    """(lambda1, lambda2) = (-v + R, -v - R), R = sqrt(4 v^2 + w^2)."""
    s = _state(s)
    R = s.R
    return -s.v + R, -s.v - R


def _r_minus_2v(s: ReducedState) -> float:
    # R - 2v without cancellation when v > 0 and |w| << v
    if s.v > 0.0:
        return s.w * s.w / (s.R + 2.0 * s.v)
    return s.R - 2.0 * s.v


def eigvec1(s, flag: bool = False):
    """Right eigenvector (w, R - 2v) of lambda1.

    On the half line w = 0, v > 0 that formula vanishes; the true eigenvector
    (1, 0) is returned instead. With ``flag=True`` a (vector, special_case)
    pair is returned.
    """
    s = _state(s)
    if s.w == 0.0 and s.v == 0.0:
        raise OriginError("eigenvector undefined at the origin")
    xi = np.array([s.w, _r_minus_2v(s)])
    special = s.w == 0.0 and s.v > 0.0
    if special:
        xi = np.array([1.0, 0.0])
    return (xi, special) if flag else xi


def nonlinearity1(s) -> float:
    """d(lambda1)(xi1) = 6 v (R - 2v) / R."""
    s = _state(s)
    R = s.R
    if R == 0.0:
        raise OriginError("nonlinearity undefined at the origin")
    return 6.0 * s.v * _r_minus_2v(s) / R


def nonlinearity1_fd(s, h: float = 1e-4) -> float:
    """Finite-difference d(lambda1)(xi1) using eigenvalues of the flux Jacobian."""
    s = _state(s)
    xi = eigvec1(s)

    def lam1(x):
        return float(np.linalg.eigvalsh(reduced_matrix(x))[-1])

    return directional_derivative(lam1, s.as_array(), xi, h * (1.0 + s.R))


@dataclass
class FGResidual:
    f_residual: np.ndarray   # (frames-2, N)
    g_residual: np.ndarray
    u_mismatch: float        # max |u from (f,g) - (-2(v^2+w^2))|

    @property
    def sup(self) -> float:
        return float(max(np.abs(self.f_residual).max(initial=0.0),
                         np.abs(self.g_residual).max(initial=0.0)))


def fg_residual(t: np.ndarray, frames: np.ndarray, dx: float) -> FGResidual:
    """Discrete residuals of f_t + f f_x + u_x = 0 and the g analogue.

    ``frames`` has shape (K, 2, N) holding (w, v); centered differences in
    time (interior frames) and periodic centered differences in space.
    """
    t = np.asarray(t, float)
    w, v = frames[:, 0], frames[:, 1]
    f = v + SQRT5 * w
    g = v - SQRT5 * w
    u = -2.0 * (v * v + w * w)
    u_alt = -(3.0 * f * f + 4.0 * f * g + 3.0 * g * g) / 5.0

    def dxc(a):
        return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) / (2.0 * dx)

    dt2 = (t[2:] - t[:-2])[:, None]
    res = []
    for z in (f, g):
        zt = (z[2:] - z[:-2]) / dt2
        res.append(zt + z[1:-1] * dxc(z[1:-1]) + dxc(u[1:-1]))
    return FGResidual(f_residual=res[0], g_residual=res[1],
                      u_mismatch=float(np.abs(u - u_alt).max()))
