"""Normalized Lax polynomials, their critical points and critical values.

A Lax polynomial of order ``n`` is

    F(p, U) = p**(n+1)/(n+1) + u_1 p**(n-1) + ... + u_n

so the vector ``U = (u_1, ..., u_n)`` is the whole state. The p**n coefficient
is pinned to zero and the leading one to ``1/(n+1)``; neither is stored.

Critical points are the roots of ``F_p``, a monic polynomial of degree ``n``.
They are found from a balanced companion matrix and then polished by Newton
iterations on the derivative of ``F_p`` whose order matches the cluster
multiplicity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

DEFAULT_CLUSTER_TOL = 1e-6


class RootFindingError(RuntimeError):
    """Root finder did not converge; carries the final residuals."""

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


class StratumDegeneracyError(ValueError):
    """Critical-value Jacobian is singular on the current stratum."""

    def __init__(self, message: str, signature: tuple[int, ...]):
        super().__init__(message)
        self.signature = signature


class AmbiguousMatchingError(RuntimeError):
    """Consecutive root sets admit two near-optimal matchings."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class LaxPoly:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError(f"LaxPoly needs n >= 2 coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return int(self.coeffs.size)

    def power_coeffs(self) -> np.ndarray:
        """Coefficients of F, highest power first (length n+2)."""
        lead = np.array([1.0 / (self.n + 1), 0.0], dtype=self.coeffs.dtype)
        return np.concatenate([lead, self.coeffs])

    def derivative_coeffs(self) -> np.ndarray:
        """Coefficients of F_p, highest power first (monic, length n+1)."""
        n = self.n
        weights = np.arange(n - 1, 0, -1)
        lead = np.array([1.0, 0.0], dtype=self.coeffs.dtype)
        return np.concatenate([lead, weights * self.coeffs[: n - 1]])

    def __call__(self, p):
        return eval_poly(self, p)


def eval_poly(F: LaxPoly, p):
    """Horner evaluation of F at ``p`` (scalar or array)."""
    acc = np.zeros_like(np.asarray(p, dtype=np.result_type(p, F.coeffs, float)))
    for c in F.power_coeffs():
        acc = acc * p + c
    return acc[()] if acc.ndim == 0 else acc


def _horner(coeffs: np.ndarray, p):
    acc = 0.0 * p
    for c in coeffs:
        acc = acc * p + c
    return acc


def _deriv(coeffs: np.ndarray, order: int = 1) -> np.ndarray:
    c = np.asarray(coeffs)
    for _ in range(order):
        deg = c.size - 1
        if deg <= 0:
            return np.zeros(1, dtype=c.dtype)
        c = c[:-1] * np.arange(deg, 0, -1)
    return c


def _cluster(roots: np.ndarray, cluster_tol: float) -> list[list[int]]:
    """Single-linkage clusters with a magnitude-scaled radius."""
    m = roots.size
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(m), 2):
        radius = cluster_tol * max(1.0, abs(roots[i]), abs(roots[j]))
        if abs(roots[i] - roots[j]) <= radius:
            parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _order_key(z: complex):
    return (round(z.real, 12), round(z.imag, 12))


def _sort_points(points: np.ndarray, mults: np.ndarray):
    order = sorted(range(points.size), key=lambda i: _order_key(points[i]))
    return points[order], mults[order]


def _polish(dcoeffs: np.ndarray, z: complex, mult: int, iters: int = 8) -> complex:
    # a root of multiplicity m of F_p is a simple root of its (m-1)-th derivative
    g = _deriv(dcoeffs, mult - 1)
    dg = _deriv(g, 1)
    best, best_res = z, abs(_horner(g, z))
    for _ in range(iters):
        d = _horner(dg, z)
        if d == 0:
            break
        z = z - _horner(g, z) / d
        res = abs(_horner(g, z))
        if not np.isfinite(res):
            break
        if res < best_res:
            best, best_res = z, res
    return best


def _snap_conjugates(points: np.ndarray, mults: np.ndarray, tol: float):
    """Real-coefficient cleanup: snap near-real points, pair conjugates exactly."""
    pts = points.astype(complex).copy()
    scale = max(1.0, float(np.max(np.abs(pts)))) if pts.size else 1.0
    for i, z in enumerate(pts):
        if abs(z.imag) <= tol * scale:
            pts[i] = complex(z.real, 0.0)
    used = set()
    for i in range(pts.size):
        if i in used or pts[i].imag <= 0:
            continue
        cand = [j for j in range(pts.size)
                if j != i and j not in used and pts[j].imag < 0 and mults[j] == mults[i]]
        if not cand:
            continue
        j = min(cand, key=lambda j: abs(pts[j] - np.conj(pts[i])))
        mid = 0.5 * (pts[i] + np.conj(pts[j]))
        pts[i], pts[j] = mid, np.conj(mid)
        used.update((i, j))
    return pts


@dataclass
class CriticalSet:
    points: np.ndarray
    multiplicities: np.ndarray
    values: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    real_value: float | None = None

    @property
    def signature(self) -> tuple[int, ...]:
        return tuple(sorted((int(m) for m in self.multiplicities), reverse=True))

    @property
    def k(self) -> int:
        return int(self.points.size)

    def expanded(self) -> np.ndarray:
        """All n critical points, repeated by multiplicity, in point order."""
        return np.repeat(self.points, self.multiplicities)


def raw_roots(F: LaxPoly) -> np.ndarray:
    """Unclustered roots of F_p (n values), companion eigenvalues."""
    return np.roots(F.derivative_coeffs()).astype(complex)


def critical_points(F: LaxPoly, cluster_tol: float = DEFAULT_CLUSTER_TOL,
                    max_residual: float = 1e-6) -> CriticalSet:
    """Roots of ``F_p`` with multiplicities, ordered by (Re, Im).

    Raises
    ------
    RootFindingError
        If a polished root still leaves a relative residual above ``max_residual``.
    """
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    dcoeffs = F.derivative_coeffs()
    roots = raw_roots(F)
    if not np.all(np.isfinite(roots)):
        raise RootFindingError("non-finite companion eigenvalues", np.full(F.n, np.inf))
    groups = _cluster(roots, cluster_tol)
    pts = np.empty(len(groups), complex)
    mults = np.empty(len(groups), int)
    for gi, g in enumerate(groups):
        z0 = complex(np.mean(roots[g]))
        pts[gi] = _polish(dcoeffs, z0, len(g))
        mults[gi] = len(g)

    real_coeffs = not np.iscomplexobj(F.coeffs)
    if real_coeffs:
        pts = _snap_conjugates(pts, mults, cluster_tol)

    scale = max(1.0, float(np.max(np.abs(dcoeffs))), float(np.max(np.abs(pts))) ** F.n)
    residuals = np.array([abs(_horner(_deriv(dcoeffs, m - 1), z))
                          for z, m in zip(pts, mults)]) / scale
    if np.any(residuals > max_residual):
        raise RootFindingError(
            f"critical points not converged, max relative residual {residuals.max():.3e}",
            residuals)

    pts, mults = _sort_points(pts, mults)
    cs = CriticalSet(points=pts, multiplicities=mults)
    cs.values = critical_values(F, cs)
    real_idx = [i for i, z in enumerate(pts) if z.imag == 0.0] if real_coeffs else []
    if len(real_idx) == 1:
        cs.real_value = float(cs.values[real_idx[0]].real)
    return cs


def critical_values(F: LaxPoly, cs: CriticalSet) -> np.ndarray:
    """r_i = F(lambda_i) for every distinct critical point."""
    vals = np.array([complex(eval_poly(F, z)) for z in cs.points], dtype=complex)
    if not np.iscomplexobj(F.coeffs):
        vals[cs.points.imag == 0.0] = vals[cs.points.imag == 0.0].real
    return vals


def critical_value_jacobian(F: LaxPoly, cs: CriticalSet) -> np.ndarray:
    """k x n matrix of dr_i/du_j = lambda_i**(n-j)."""
    powers = np.arange(F.n - 1, -1, -1)
    return cs.points[:, None] ** powers[None, :]


@dataclass
class StratumResult:
    signature: tuple[int, ...]
    ambiguous: bool = False
    candidates: list[tuple[int, ...]] = field(default_factory=list)


def classify_stratum(F: LaxPoly, cluster_tol: float = DEFAULT_CLUSTER_TOL,
                     band: float = 10.0) -> StratumResult:
    """Multiplicity signature of ``F_p``.

    The clustering is repeated at ``cluster_tol/band`` and ``cluster_tol*band``;
    if either disagrees with the nominal signature the result is flagged and
    every distinct candidate is listed.
    """
    sig = critical_points(F, cluster_tol).signature
    roots = raw_roots(F)
    cands = [sig]
    for tol in (cluster_tol / band, cluster_tol * band):
        alt = tuple(sorted((len(g) for g in _cluster(roots, tol)), reverse=True))
        if alt not in cands:
            cands.append(alt)
    return StratumResult(signature=sig, ambiguous=len(cands) > 1,
                         candidates=cands if len(cands) > 1 else [])


@dataclass
class TrackResult:
    branches: np.ndarray          # (samples, n) complex
    max_jump: float
    jumps: np.ndarray             # per step
    permutation: tuple[int, ...] | None = None   # closed paths only

    @property
    def n_branches(self) -> int:
        return self.branches.shape[1]


def _match(prev: np.ndarray, cur: np.ndarray, amb_tol: float | None, step: int) -> np.ndarray:
    cost = np.abs(prev[:, None] - cur[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    if amb_tol is None:
        return perm
    best = cost[np.arange(prev.size), perm].sum()
    scale = max(1.0, float(np.max(np.abs(prev))))
    for a, b in itertools.combinations(range(prev.size), 2):
        if abs(prev[a] - prev[b]) <= amb_tol * scale:
            continue
        if abs(cur[perm[a]] - cur[perm[b]]) <= amb_tol * scale:
            continue
        swapped = best - cost[a, perm[a]] - cost[b, perm[b]] + cost[a, perm[b]] + cost[b, perm[a]]
        if swapped - best <= amb_tol * max(best, scale * amb_tol):
            raise AmbiguousMatchingError(
                f"ambiguous root matching at sample {step}; refine the path there", step)
    return perm


def track_roots(path: Sequence[Sequence[float]] | np.ndarray,
                amb_tol: float | None = 1e-9, closed: bool | None = None) -> TrackResult:
    """Continuous root branches of ``F_p`` along sampled coefficient vectors.

    ``path`` has shape (samples, n). Consecutive root sets are matched by the
    assignment of minimal total displacement. For closed paths (first and last
    sample equal) the permutation between the starting and final assignment is
    reported.
    """
    U = np.asarray(path)
    if U.ndim != 2 or U.shape[0] < 1:
        raise ValueError("path must have shape (samples, n)")
    out = np.empty(U.shape, complex)
    out[0] = np.sort_complex(raw_roots(LaxPoly(U[0])))
    jumps = np.zeros(max(U.shape[0] - 1, 0))
    for s in range(1, U.shape[0]):
        cur = raw_roots(LaxPoly(U[s]))
        perm = _match(out[s - 1], cur, amb_tol, s)
        out[s] = cur[perm]
        jumps[s - 1] = float(np.max(np.abs(out[s] - out[s - 1])))
    if closed is None:
        closed = U.shape[0] > 1 and np.allclose(U[0], U[-1], rtol=0, atol=1e-14)
    permutation = None
    if closed:
        cost = np.abs(out[-1][:, None] - out[0][None, :])
        rows, cols = linear_sum_assignment(cost)
        permutation = tuple(int(c) for c in cols[np.argsort(rows)])
    return TrackResult(branches=out, max_jump=float(jumps.max()) if jumps.size else 0.0,
                       jumps=jumps, permutation=permutation)


def stratum_system(F: LaxPoly, cs: CriticalSet, on_stratum: bool = True) -> np.ndarray:
    """Square linear map dU -> (tangency conditions, critical-value changes).

    Rows ``d^j/dp^j p**(n-l)`` at each point for ``1 <= j <= m_i - 1`` pin the
    variation to the stratum tangent space; rows ``lambda_i**(n-l)`` give the
    critical-value differentials. With ``on_stratum=False`` the points are
    expanded by multiplicity and only value rows are used, i.e. the
    generic-stratum Vandermonde matrix.
    """
    n = F.n
    powers = np.arange(n - 1, -1, -1)
    if not on_stratum:
        return cs.expanded()[:, None] ** powers[None, :]
    rows = []
    for z, m in zip(cs.points, cs.multiplicities):
        for j in range(1, int(m)):
            falling = np.array([math.perm(int(q), j) if q >= j else 0 for q in powers], float)
            exps = np.maximum(powers - j, 0)
            rows.append(falling * z ** exps)
    rows.extend(cs.points[:, None] ** powers[None, :])
    return np.array(rows, dtype=complex)


def constant_value_continuation(F0: LaxPoly, cluster_tol: float = DEFAULT_CLUSTER_TOL,
                                on_stratum: bool = False, dr=None,
                                cond_max: float = 1e12) -> np.ndarray:
    """Velocity dU of a curve through F0 whose critical values move by ``dr``.

    With the default ``dr = 0`` (constant critical values) the unique solution is
    the zero vector. ``on_stratum=False`` uses the n x n Vandermonde matrix of
    all roots, which is singular off the generic stratum; ``on_stratum=True``
    restricts to the tangent space of the stratum F0 lies on.

    Raises
    ------
    StratumDegeneracyError
        If the linear system is singular (condition number above ``cond_max``).
    """
    cs = critical_points(F0, cluster_tol)
    M = stratum_system(F0, cs, on_stratum=on_stratum)
    cond = np.linalg.cond(M) if M.shape[0] == M.shape[1] else np.inf
    if not np.isfinite(cond) or cond > cond_max:
        raise StratumDegeneracyError(
            f"critical-value Jacobian singular on stratum {cs.signature} (cond={cond:.3g})",
            cs.signature)
    rhs = np.zeros(M.shape[0], complex)
    if dr is not None:
        dr = np.asarray(dr, complex)
        if dr.size != cs.k:
            raise ValueError(f"dr must have {cs.k} entries")
        if on_stratum:
            rhs[M.shape[0] - cs.k:] = dr
        else:
            rhs[:] = np.repeat(dr, cs.multiplicities)
    dU = np.linalg.solve(M, rhs)
    if not np.iscomplexobj(F0.coeffs):
        dU = dU.real
    return dU


def min_root_gap(F: LaxPoly) -> float:
    r = raw_roots(F)
    return float(min(abs(a - b) for a, b in itertools.combinations(r, 2)))


def batch_roots(U: np.ndarray) -> np.ndarray:
    """Roots of F_p for many states at once; ``U`` has shape (n, N).

    Stacked companion-matrix eigenvalues, unordered, no polishing. Used for
    time-step control where only the spectral radius is needed.
    """
    n, N = U.shape
    C = np.zeros((N, n, n))
    C[:, 1:, :-1] = np.eye(n - 1)
    d = np.zeros((N, n))
    weights = np.arange(n - 1, 0, -1)
    d[:, 1:] = (weights[:, None] * U[: n - 1]).T
    C[:, :, -1] = -d[:, ::-1]
    return np.linalg.eigvals(C)
