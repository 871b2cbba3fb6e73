"""The matrix of the quasi-linear system, its spectrum and nonlinearity.

The system reads ``U_t + A(U) U_x = 0`` with

    A[k, k+1] = 1,   A[k, 0] = -(n - k) * u_k      (0-based, u_0 := 0)

and every other entry zero. Its characteristic polynomial is ``F_p``.
Eigenvalues here always come from the polynomial root finder in
:mod:`benney_lab.polyfam`, never from a dense eigen-solver, so that the
identity ``det(pI - A) = F_p`` can be checked against an independent route.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .polyfam import (DEFAULT_CLUSTER_TOL, LaxPoly, critical_points, eval_poly,
                      raw_roots, track_roots)


class Regime(str, enum.Enum):
    STRICTLY_HYPERBOLIC = "StrictlyHyperbolic"
    ONE_REAL = "OneRealRegime"
    DEGENERATE_REAL = "DegenerateReal"
    MIXED_OTHER = "MixedOther"


class NonSimpleEigenvalueError(ValueError):
    pass


class RegimeChangeError(ValueError):
    def __init__(self, message: str, cells: list):
        super().__init__(message)
        self.cells = cells


def build_A(U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    n = U.size
    A = np.zeros((n, n))
    A[np.arange(n - 1), np.arange(1, n)] = 1.0
    k = np.arange(1, n)
    A[k, 0] = -(n - k) * U[k - 1]
    return A


def apply_A(U: np.ndarray, Ux: np.ndarray) -> np.ndarray:
    """A(U) @ U_x cell by cell; ``U`` and ``Ux`` have shape (n, N)."""
    n = U.shape[0]
    out = np.empty_like(Ux)
    out[: n - 1] = Ux[1:]
    out[n - 1] = 0.0
    w = (n - np.arange(1, n))[:, None]
    out[1:] -= w * U[: n - 1] * Ux[0]
    return out


def charpoly_coeffs(A: np.ndarray) -> np.ndarray:
    """det(pI - A), highest power first, by Faddeev-LeVerrier."""
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    M = np.zeros_like(A)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + c[k - 1] * I
        c[k] = -np.trace(A @ M) / k
    return c


def charpoly_residual(U) -> np.ndarray:
    """Coefficient-wise det(pI - A(U)) minus F_p(p, U)."""
    U = np.asarray(U, dtype=float)
    return charpoly_coeffs(build_A(U)) - LaxPoly(U).derivative_coeffs()


def eigenvector(U, lam: complex) -> np.ndarray:
    """Right eigenvector of A(U) for eigenvalue ``lam`` (first entry 1)."""
    U = np.asarray(U)
    n = U.size
    xi = np.empty(n, dtype=np.result_type(U, lam, float))
    xi[0] = 1.0
    for r in range(n - 1):
        prev = U[r - 1] if r >= 1 else 0.0
        xi[r + 1] = lam * xi[r] + (n - r) * prev * xi[0]
    return xi


def normalize(xi: np.ndarray) -> np.ndarray:
    """Unit norm, first nonzero component positive."""
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi)
    if nrm == 0:
        raise ValueError("zero vector cannot be normalized")
    xi = xi / nrm
    nz = np.flatnonzero(np.abs(xi) > 1e-14)
    if nz.size and xi[nz[0]] < 0:
        xi = -xi
    return xi


def directional_derivative(fn: Callable[[np.ndarray], float], x, direction, h: float) -> float:
    """Central difference of ``fn`` along ``direction`` with one Richardson step."""
    x = np.asarray(x, float)
    d = np.asarray(direction, float)

    def central(step):
        return (fn(x + step * d) - fn(x - step * d)) / (2 * step)

    return (4.0 * central(h / 2) - central(h)) / 3.0


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    regime: Regime
    borderline: bool = False
    real_eigen: tuple[float, np.ndarray] | None = None
    nonlinearity: dict[int, float] = field(default_factory=dict)


def _default_gap_tol(eigs: np.ndarray) -> float:
    return 1e-8 * (1.0 + float(np.max(np.abs(eigs))))


def classify_state(U, gap_tol: float | None = None,
                   cluster_tol: float = DEFAULT_CLUSTER_TOL,
                   with_nonlinearity: bool = False) -> SpectralData:
    """Hyperbolicity regime of A(U).

    Real means ``|Im| <= gap_tol``; a state is borderline when some gap or
    imaginary part lies within a factor 10 above ``gap_tol``.
    """
    U = np.asarray(U, float)
    n = U.size
    cs = critical_points(LaxPoly(U), cluster_tol)
    eigs = cs.expanded()
    tol = _default_gap_tol(eigs) if gap_tol is None else gap_tol
    if tol <= 0:
        raise ValueError("gap_tol must be positive")

    is_real = np.abs(eigs.imag) <= tol
    gaps = [abs(a - b) for a, b in itertools.combinations(eigs, 2)]
    min_gap = min(gaps) if gaps else np.inf
    near = [abs(z.imag) for z in eigs if abs(z.imag) > tol] + [g for g in gaps if g > tol]
    borderline = any(g <= 10 * tol for g in near)

    n_real = int(is_real.sum())
    if n_real == n:
        regime = Regime.STRICTLY_HYPERBOLIC if min_gap > tol else Regime.DEGENERATE_REAL
    elif n % 2 == 1 and n_real == 1 and min_gap > tol:
        regime = Regime.ONE_REAL
    else:
        regime = Regime.MIXED_OTHER

    data = SpectralData(eigenvalues=eigs, regime=regime, borderline=borderline)
    if regime is Regime.ONE_REAL:
        i = int(np.flatnonzero(is_real)[0])
        mu = float(eigs[i].real)
        data.real_eigen = (mu, normalize(eigenvector(U, mu).real))
    if with_nonlinearity:
        for i in np.flatnonzero(is_real):
            others = np.delete(eigs, i)
            if np.min(np.abs(others - eigs[i])) > tol:
                data.nonlinearity[int(i)] = genuine_nonlinearity(U, int(i))
    return data


def _nearest_real_root(U: np.ndarray, target: float) -> float:
    r = raw_roots(LaxPoly(U))
    return float(r[np.argmin(np.abs(r - target))].real)


def genuine_nonlinearity(U, i: int, direction=None, h: float | None = None,
                         cluster_tol: float = DEFAULT_CLUSTER_TOL) -> float:
    """d(lambda_i)(xi_i): derivative of eigenvalue ``i`` along its eigenvector.

    ``i`` indexes the eigenvalues in (Re, Im) order with multiplicity. The
    eigenvector is unit-normalized with its first nonzero entry positive unless
    an explicit ``direction`` is given.
    """
    U = np.asarray(U, float)
    cs = critical_points(LaxPoly(U), cluster_tol)
    eigs = cs.expanded()
    lam = eigs[i]
    tol = _default_gap_tol(eigs)
    if abs(lam.imag) > tol:
        raise NonSimpleEigenvalueError(f"eigenvalue {i} = {lam} is not real")
    if np.min(np.abs(np.delete(eigs, i) - lam)) <= tol:
        raise NonSimpleEigenvalueError(f"eigenvalue {i} = {lam} is not simple")
    lam = float(lam.real)
    d = normalize(eigenvector(U, lam)) if direction is None else np.asarray(direction, float)
    step = 1e-5 * (1.0 + np.linalg.norm(U)) if h is None else h
    return directional_derivative(lambda V: _nearest_real_root(V, lam), U, d, step)


def matrix_nonlinearity(matrix: Callable[[np.ndarray], np.ndarray], x, i: int,
                        direction=None, h: float | None = None) -> float:
    """Same derivative for a small symmetric-or-not matrix field ``matrix(x)``.

    Eigenvalues are taken in descending real order; the default direction is
    the normalized right eigenvector.
    """
    x = np.asarray(x, float)

    def lam_of(y):
        ev = np.linalg.eigvals(matrix(y))
        return float(np.sort(ev.real)[::-1][i])

    if direction is None:
        ev, vec = np.linalg.eig(matrix(x))
        order = np.argsort(ev.real)[::-1]
        direction = normalize(vec[:, order[i]].real)
    step = 1e-5 * (1.0 + np.linalg.norm(x)) if h is None else h
    return directional_derivative(lam_of, x, direction, step)


@dataclass
class RiemannFields:
    points: np.ndarray     # (frames, N, n) critical points, branch-consistent
    values: np.ndarray     # (frames, N, n) critical values
    regime: np.ndarray     # (frames, N) regime tags
    regions: np.ndarray    # (frames, N) integer region labels
    consistent: bool
    real_values: np.ndarray | None = None   # rho where exactly one real point


def _label_regions(reg: np.ndarray) -> np.ndarray:
    labels = np.zeros(reg.shape, int)
    cur = 0
    flat = reg.reshape(-1)
    lab = labels.reshape(-1)
    for j in range(1, flat.size):
        if flat[j] != flat[j - 1]:
            cur += 1
        lab[j] = cur
    return labels


def riemann_fields(states: np.ndarray, gap_tol: float | None = None,
                   strict: bool = False) -> RiemannFields:
    """Critical-value fields over a (frames, n, N) or (n, N) grid.

    Branches are made consistent along each row by root tracking; the first
    cell of each frame is matched to the first cell of the previous frame.
    """
    S = np.asarray(states, float)
    if S.ndim == 2:
        S = S[None]
    T, n, N = S.shape
    regime = np.empty((T, N), dtype=object)
    for t in range(T):
        for j in range(N):
            regime[t, j] = classify_state(S[t, :, j], gap_tol).regime.value
    consistent = bool(np.all(regime == regime[0, 0]))
    if strict and not consistent:
        bad = [tuple(ix) for ix in np.argwhere(regime != regime[0, 0])]
        raise RegimeChangeError(f"regime changes across grid at {len(bad)} cells", bad)

    points = np.empty((T, N, n), complex)
    prev_first = None
    for t in range(T):
        row = track_roots(S[t].T, amb_tol=None).branches
        if prev_first is not None:
            cost = np.abs(prev_first[:, None] - row[0][None, :])
            r, c = linear_sum_assignment(cost)
            row = row[:, c[np.argsort(r)]]
        points[t] = row
        prev_first = row[0]
    values = np.empty_like(points)
    for t in range(T):
        for j in range(N):
            values[t, j] = eval_poly(LaxPoly(S[t, :, j]), points[t, j])
    real_values = None
    if consistent and regime[0, 0] == Regime.ONE_REAL.value:
        mask = np.abs(points.imag) <= 1e-8 * (1 + np.abs(points))
        real_values = np.where(mask, values.real, -np.inf).max(axis=2)
    return RiemannFields(points=points, values=values, regime=regime,
                         regions=_label_regions(regime), consistent=consistent,
                         real_values=real_values)
