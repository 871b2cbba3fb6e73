"""Periodic 1-D time integration and residual diagnostics.

Two schemes live here:

* ``simulate_2x2``: conservative finite volumes with a Rusanov flux and forward
  Euler, first order, for the reduced pair (w, v);
* ``simulate_quasilinear``: method of lines for ``U_t + A(U) U_x = 0`` with
  centered differences and classical RK4, plus optional artificial viscosity.

Time steps follow ``dt = cfl * dx / max|lambda|`` and are clipped so that
frames land exactly on multiples of ``frame_dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .polyfam import LaxPoly, batch_roots, critical_points, eval_poly, raw_roots
from .reduction import flux_arrays, lift_coeffs
from .spectral import apply_A

DEFAULT_BLOWUP_FACTOR = 50.0


@dataclass(frozen=True)
class Grid1D:
    N: int
    L: float = 1.0

    def __post_init__(self):
        if self.N < 16:
            raise ValueError(f"grid needs N >= 16 cells, got {self.N}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.dx


@dataclass
class SimConfig:
    cfl: float = 0.45
    tmax: float = 1.0
    frame_dt: float | None = None
    visc: float = 0.0
    max_steps: int | None = None
    blowup_factor: float | None = None

    def __post_init__(self):
        if not (0 < self.cfl and math.isfinite(self.cfl)):
            raise ValueError("cfl must be positive")
        if not (self.tmax > 0 and math.isfinite(self.tmax)):
            raise ValueError("tmax must be positive")
        if self.visc < 0:
            raise ValueError("viscosity must be non-negative")

    def frame_interval(self) -> float:
        return self.frame_dt if self.frame_dt else self.tmax / 50.0


@dataclass
class BlowupReport:
    blown_up: bool = False
    time: float | None = None
    reason: str = ""
    growth_factor: float = 1.0
    history: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"blown_up": self.blown_up, "time": self.time, "reason": self.reason,
                "growth_factor": self.growth_factor}


@dataclass
class Trajectory:
    grid: Grid1D
    t: np.ndarray            # (K,)
    frames: np.ndarray       # (K, m, N)
    names: tuple[str, ...]
    metadata: dict = field(default_factory=dict)
    blowup: BlowupReport = field(default_factory=BlowupReport)

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.frames = np.asarray(self.frames, float)
        if self.frames.ndim != 3 or self.frames.shape[0] != self.t.size:
            raise ValueError("frames must have shape (len(t), components, N)")
        if self.frames.shape[2] != self.grid.N:
            raise ValueError("frames do not match the grid")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("frame times must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.frames[-1]

    @property
    def n_components(self) -> int:
        return self.frames.shape[1]

    def complete(self, tmax: float) -> bool:
        return not self.blowup.blown_up and abs(self.t[-1] - tmax) <= 1e-12 * max(1.0, tmax)


def _max_gradient(U: np.ndarray, dx: float) -> float:
    return float(np.max(np.abs(np.roll(U, -1, axis=-1) - U))) / dx


def _integrate(U0: np.ndarray, grid: Grid1D, cfg: SimConfig,
               step: Callable[[np.ndarray, float], np.ndarray],
               speed: Callable[[np.ndarray], float],
               names: Sequence[str], scheme: str) -> Trajectory:
    dx = grid.dx
    U = np.array(U0, dtype=float)
    if not np.all(np.isfinite(U)):
        raise ValueError("initial data must be finite")
    frame_dt = cfg.frame_interval()
    times, frames = [0.0], [U.copy()]
    g0 = max(_max_gradient(U, dx), 1e-300)
    report = BlowupReport(history=[(0.0, g0)])
    t, k_next, nsteps, max_cfl = 0.0, 1, 0, 0.0
    limit = cfg.max_steps if cfg.max_steps is not None else np.inf

    with np.errstate(all="ignore"):
        while t < cfg.tmax and nsteps < limit:
            t_next = min(k_next * frame_dt, cfg.tmax)
            s = speed(U)
            if not np.isfinite(s):
                report.blown_up, report.time, report.reason = True, t, "non-finite wave speed"
                break
            dt = cfg.cfl * dx / s if s > 0 else t_next - t
            hit = dt >= t_next - t
            if hit:
                dt = t_next - t
            U_new = step(U, dt)
            nsteps += 1
            if not np.all(np.isfinite(U_new)):
                report.blown_up, report.time = True, t + dt
                report.reason = "NaN/Inf in state"
                break
            max_cfl = max(max_cfl, s * dt / dx)
            U = U_new
            t = t_next if hit else t + dt
            if hit:
                k_next += 1
            if hit or nsteps == limit:
                if t > times[-1]:
                    times.append(t)
                    frames.append(U.copy())
                g = _max_gradient(U, dx)
                report.history.append((t, g))
                report.growth_factor = max(report.growth_factor, g / g0)
                if cfg.blowup_factor is not None and g > cfg.blowup_factor * g0:
                    report.blown_up, report.time = True, t
                    report.reason = f"gradient exceeded {cfg.blowup_factor}x initial"
                    break

    meta = {"scheme": scheme, "cfl": cfg.cfl, "viscosity": cfg.visc, "steps": nsteps,
            "max_cfl_used": max_cfl, "tmax": cfg.tmax, "frame_dt": frame_dt, "N": grid.N}
    return Trajectory(grid=grid, t=np.array(times), frames=np.array(frames),
                      names=tuple(names), metadata=meta, blowup=report)


def rusanov_update(U: np.ndarray, dt: float, dx: float) -> np.ndarray:
    """One forward-Euler Rusanov step for the reduced pair."""
    w, v = U
    F = flux_arrays(w, v)
    spd = np.abs(v) + np.sqrt(4.0 * v * v + w * w)
    a = np.maximum(spd, np.roll(spd, -1))
    UR = np.roll(U, -1, axis=1)
    Fh = 0.5 * (F + np.roll(F, -1, axis=1)) - 0.5 * a * (UR - U)
    return U - (dt / dx) * (Fh - np.roll(Fh, 1, axis=1))


def simulate_2x2(w0, v0, grid: Grid1D, cfg: SimConfig | None = None) -> Trajectory:
    cfg = cfg or SimConfig()
    U0 = np.stack([np.asarray(w0, float), np.asarray(v0, float)])
    dx = grid.dx

    def speed(U):
        w, v = U
        return float(np.max(np.abs(v) + np.sqrt(4.0 * v * v + w * w)))

    return _integrate(U0, grid, cfg, lambda U, dt: rusanov_update(U, dt, dx), speed,
                      ("w", "v"), "rusanov-euler")


def _central(U: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(U, -1, axis=-1) - np.roll(U, 1, axis=-1)) / (2.0 * dx)


def quasilinear_rhs(U: np.ndarray, dx: float, visc: float = 0.0) -> np.ndarray:
    rhs = -apply_A(U, _central(U, dx))
    if visc:
        rhs += visc * (np.roll(U, -1, axis=-1) - 2.0 * U + np.roll(U, 1, axis=-1)) / dx
    return rhs


def simulate_quasilinear(U0, grid: Grid1D, cfg: SimConfig | None = None) -> Trajectory:
    cfg = cfg or SimConfig()
    U0 = np.asarray(U0, float)
    n = U0.shape[0]
    if n < 2:
        raise ValueError("need at least two components")
    dx = grid.dx

    def rhs(U):
        return quasilinear_rhs(U, dx, cfg.visc)

    def step(U, dt):
        k1 = rhs(U)
        k2 = rhs(U + 0.5 * dt * k1)
        k3 = rhs(U + 0.5 * dt * k2)
        k4 = rhs(U + dt * k3)
        return U + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def speed(U):
        return float(np.max(np.abs(batch_roots(U))))

    return _integrate(U0, grid, cfg, step, speed,
                      tuple(f"u{k}" for k in range(1, n + 1)), "central-rk4")


def lift_trajectory(traj: Trajectory) -> Trajectory:
    """Frame-wise lift of a (w, v) trajectory to the n = 4 coefficients."""
    frames = np.stack([lift_coeffs(F[0], F[1]) for F in traj.frames])
    meta = dict(traj.metadata, lifted_from="w,v")
    return Trajectory(grid=traj.grid, t=traj.t.copy(), frames=frames,
                      names=("u1", "u2", "u3", "u4"), metadata=meta, blowup=traj.blowup)


@dataclass
class ResidualReport:
    field: np.ndarray
    sup: float
    l2: float

    def to_dict(self) -> dict:
        return {"sup": self.sup, "l2": self.l2}


def _time_derivative(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    if traj.t.size < 3:
        raise ValueError("need at least 3 frames for time differencing")
    dt2 = (traj.t[2:] - traj.t[:-2])[:, None, None]
    return (traj.frames[2:] - traj.frames[:-2]) / dt2, traj.frames[1:-1]


def system_residual(traj: Trajectory) -> ResidualReport:
    """Pointwise |U_t + A(U) U_x| on interior frames (centered differences)."""
    Ut, U = _time_derivative(traj)
    dx = traj.grid.dx
    res = np.stack([Ut[k] + apply_A(U[k], _central(U[k], dx)) for k in range(U.shape[0])])
    pointwise = np.linalg.norm(res, axis=1)
    return ResidualReport(field=pointwise, sup=float(pointwise.max()),
                          l2=float(np.sqrt(np.mean(pointwise ** 2))))


def conservation_residual(traj: Trajectory, p_samples: Sequence[float]) -> dict:
    """Discrete F_t + p F_x - u_x F_p at each sample momentum p.

    Returns per-p and overall sup / L2 norms over interior frames and cells.
    """
    Ut, U = _time_derivative(traj)
    dx = traj.grid.dx
    n = traj.n_components
    powers = np.arange(n - 1, -1, -1)
    out: dict = {"per_p": {}}
    sups, sq = [], []
    for p in p_samples:
        basis = float(p) ** powers                       # dF/du_k
        dbasis = np.where(powers > 0, powers * float(p) ** np.maximum(powers - 1, 0), 0.0)
        F_t = np.einsum("k,tkn->tn", basis, Ut)
        F_x = np.einsum("k,tkn->tn", basis, _central(U, dx))
        F_p = p ** n + np.einsum("k,tkn->tn", dbasis, U)
        u_x = _central(U[:, 0], dx)
        r = F_t + p * F_x - u_x * F_p
        s, l2 = float(np.abs(r).max()), float(np.sqrt(np.mean(r ** 2)))
        out["per_p"][float(p)] = {"sup": s, "l2": l2}
        sups.append(s)
        sq.append(l2 ** 2)
    out["sup"] = max(sups)
    out["l2"] = float(np.sqrt(np.mean(sq)))
    return out


def interpolate_state(traj: Trajectory, t: float, x: float) -> np.ndarray:
    """Bilinear (linear in t, periodic linear in x) interpolation of the frames."""
    ts = traj.t
    k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
    alpha = (t - ts[k]) / (ts[k + 1] - ts[k])
    N, dx = traj.grid.N, traj.grid.dx
    s = (x % traj.grid.L) / dx - 0.5
    j0 = math.floor(s)
    beta = s - j0
    j0 %= N
    j1 = (j0 + 1) % N

    def at(F):
        return (1.0 - beta) * F[:, j0] + beta * F[:, j1]

    return (1.0 - alpha) * at(traj.frames[k]) + alpha * at(traj.frames[k + 1])


@dataclass
class CharacteristicPath:
    t: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    r: np.ndarray
    drift: float
    truncated: bool = False
    reason: str = ""


def trace_characteristic(traj: Trajectory, i: int, x0: float, substeps: int = 1,
                         gap_tol: float = 1e-8) -> CharacteristicPath:
    """Integrate dx/dt = lambda_i along the stored frames by RK4.

    ``i`` indexes the eigenvalues at (t0, x0) in (Re, Im) order. The branch is
    followed by continuity (nearest root at every stage); the critical value
    r_i = F(lambda_i) is sampled at every frame time. A real branch that turns
    complex or collides with another root truncates the path.
    """
    U = interpolate_state(traj, traj.t[0], x0)
    eigs = critical_points(LaxPoly(U)).expanded()
    lam = complex(eigs[i])
    real_branch = abs(lam.imag) <= gap_tol * (1 + abs(lam))

    class _Leave(Exception):
        pass

    def branch(t, x, ref):
        V = interpolate_state(traj, t, x)
        r = raw_roots(LaxPoly(V))
        d = np.abs(r - ref)
        j = int(np.argmin(d))
        z = complex(r[j])
        tol = gap_tol * (1 + abs(z))
        if real_branch:
            if abs(z.imag) > tol:
                raise _Leave("eigenvalue left the real axis")
            if np.min(np.abs(np.delete(r, j) - z)) <= max(tol, 1e-6):
                raise _Leave("eigenvalue collided with another root")
            z = complex(z.real, 0.0)
        return z, V

    def value(V, z):
        val = complex(eval_poly(LaxPoly(V), z))
        return val.real if real_branch else val

    ts, xs, lams, rs = [traj.t[0]], [x0], [lam], [value(U, lam)]
    truncated, reason = False, ""
    x, cur = x0, lam
    try:
        for k in range(traj.t.size - 1):
            t0, t1 = traj.t[k], traj.t[k + 1]
            h = (t1 - t0) / substeps
            for m in range(substeps):
                tt = t0 + m * h
                k1, _ = branch(tt, x, cur)
                k2, _ = branch(tt + h / 2, x + h / 2 * k1.real, k1)
                k3, _ = branch(tt + h / 2, x + h / 2 * k2.real, k2)
                k4, _ = branch(tt + h, x + h * k3.real, k3)
                x = x + h / 6 * (k1.real + 2 * k2.real + 2 * k3.real + k4.real)
                cur = k4
            cur, V = branch(t1, x, cur)
            ts.append(t1)
            xs.append(x)
            lams.append(cur)
            rs.append(value(V, cur))
    except _Leave as exc:
        truncated, reason = True, str(exc)
    r = np.array(rs)
    return CharacteristicPath(t=np.array(ts), x=np.array(xs), lam=np.array(lams), r=r,
                              drift=float(np.max(np.abs(r - r[0]))),
                              truncated=truncated, reason=reason)


def detect_blowup(traj: Trajectory, threshold: float = DEFAULT_BLOWUP_FACTOR) -> BlowupReport:
    """First frame whose max gradient exceeds ``threshold`` times the initial one."""
    dx = traj.grid.dx
    grads = [_max_gradient(F, dx) for F in traj.frames]
    g0 = max(grads[0], 1e-300)
    report = BlowupReport(history=list(zip(traj.t.tolist(), grads)),
                          growth_factor=float(max(grads) / g0))
    if traj.blowup.blown_up and "NaN" in traj.blowup.reason:
        report.blown_up, report.time, report.reason = True, traj.blowup.time, traj.blowup.reason
        return report
    if grads[0] == 0.0:
        return report
    for tk, g in zip(traj.t, grads):
        if g > threshold * g0:
            report.blown_up, report.time = True, float(tk)
            report.reason = f"gradient exceeded {threshold}x initial"
            break
    return report


def self_convergence(errors: Sequence[float]) -> list[float]:
    """Observed orders log2(e_k / e_{k+1}) for successive grid doublings."""
    return [math.log2(a / b) if a > 0 and b > 0 else float("nan")
            for a, b in zip(errors[:-1], errors[1:])]
