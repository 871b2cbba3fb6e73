"""Command-line front end.

Every subcommand builds a ``RunConfig`` from an optional ``--config`` file and
then applies command-line flags on top (flag wins). Reports are JSON with
sorted keys; frames are CSV.

Exit status: 0 when everything passed, 1 when a check failed or a run stopped
early, 2 on usage, config or input errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__, io, polyfam, reduction, solver, spectral, wavegen
from . import checks
from .config import COMMANDS, ConfigError, RunConfig, apply, load, serialize

BUILTINS = ("autonomous-n3", "reduced-smooth", "constant")


class UsageError(ValueError):
    pass


# -- argument parsing ------------------------------------------------------

def _key_val(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VAL, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--n", type=int, help="number of components")
    common.add_argument("--grid", type=int, help="number of cells")
    common.add_argument("--cfl", type=float)
    common.add_argument("--tmax", type=float)
    common.add_argument("--viscosity", type=float)
    common.add_argument("--frame-dt", type=float, dest="frame_dt")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=_key_val, action="append", default=[], metavar="KEY=VAL",
                        help="tolerance override; 'scale' multiplies every tolerance")
    common.add_argument("--state", help="comma-separated state vector")
    common.add_argument("--init", help=f"builtin initial data: {', '.join(BUILTINS)}")
    common.add_argument("--init-csv", dest="init_csv", metavar="PATH",
                        help="frame CSV used as initial data or input field")
    common.add_argument("--set", type=_key_val, action="append", default=[], metavar="KEY=VAL",
                        dest="extra", help="any other config key, e.g. init.amp=0.2")

    parser = argparse.ArgumentParser(prog="benney-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="hyperbolicity regime census")
    p.add_argument("--sweep", choices=("reduced", "discriminant"))
    p.add_argument("--samples", type=int)
    sub.add_parser("simulate", parents=[common], help="evolve initial data and write frames")
    sub.add_parser("reduce-lift", parents=[common], help="lift (w, v) states to n = 4")
    p = sub.add_parser("travelwave", parents=[common], help="traveling-wave generator")
    p.add_argument("--mu")
    p.add_argument("--constants", help="comma-separated integration constants c2..cn")
    sub.add_parser("strata", parents=[common], help="critical points and stratum data")
    p = sub.add_parser("verify", parents=[common], help="run acceptance checks")
    p.add_argument("--check", action="append", default=[], metavar="ID",
                   help=f"run only this check (repeatable): {', '.join(checks.CHECKS)}")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = load(args.config) if args.config else RunConfig()
    cfg.command = args.command
    for key in ("out", "n", "grid", "cfl", "tmax", "viscosity", "frame_dt", "seed",
                "init", "init_csv", "sweep", "samples"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    for key in ("state", "mu", "constants"):
        val = getattr(args, key, None)
        if val is not None:
            apply(cfg, key, val)
    if getattr(args, "check", None):
        cfg.checks = tuple(args.check)
    for k, v in args.tol:
        apply(cfg, f"tol.{k}", v)
    for k, v in args.extra:
        apply(cfg, k, v)
    return cfg.validate()


# -- helpers ---------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(cfg: RunConfig, report: dict, name: str) -> Path:
    out = _out(cfg)
    (out / "config.txt").write_text(serialize(cfg))
    return io.write_json(out / name, report)


def _state(cfg: RunConfig, size: int | None = None) -> np.ndarray:
    if not cfg.state:
        raise UsageError("this command needs --state")
    U = np.array(cfg.state, float)
    if size is not None and U.size != size:
        raise UsageError(f"expected a state with {size} entries, got {U.size}")
    return U


def _spectral_summary(U: np.ndarray) -> dict:
    data = spectral.classify_state(U, with_nonlinearity=True)
    return {"state": U, "regime": data.regime.value, "borderline": data.borderline,
            "eigenvalues": [complex(z) for z in data.eigenvalues],
            "nonlinearity": {str(i): v for i, v in data.nonlinearity.items()},
            "nonlinearity_sign": {str(i): int(np.sign(v)) for i, v in data.nonlinearity.items()},
            "real_eigen": (None if data.real_eigen is None else
                           {"value": data.real_eigen[0], "eigenvector": data.real_eigen[1]})}


# -- classify --------------------------------------------------------------

def _classify_reduced(cfg: RunConfig) -> tuple[dict, bool]:
    grid = np.linspace(-2.0, 2.0, cfg.samples)
    signs = np.zeros((grid.size, grid.size), int)
    mismatches = 0
    for a, w in enumerate(grid):
        for b, v in enumerate(grid):
            if w == 0.0 and v == 0.0:
                continue
            nl = reduction.nonlinearity1(reduction.ReducedState(float(w), float(v)))
            signs[a, b] = int(np.sign(nl))
            if w != 0.0 and signs[a, b] != np.sign(v):
                mismatches += 1
    report = {"sweep": "reduced", "w": grid, "v": grid, "sign_map": signs,
              "sign_mismatches_vs_v": mismatches}
    return report, mismatches == 0


def discriminant_n3(u1, u2):
    """Discriminant of p**3 + 2 u1 p + u2 (positive: three distinct real roots)."""
    return -(32.0 * u1 ** 3 + 27.0 * u2 ** 2)


def _classify_discriminant(cfg: RunConfig) -> tuple[dict, bool]:
    u1 = cfg.params.get("u1", -1.0)
    lo, hi = cfg.params.get("u2_min", -2.0), cfg.params.get("u2_max", 2.0)
    u2 = np.linspace(lo, hi, cfg.samples)
    regimes = [spectral.classify_state([u1, s, 0.0]).regime for s in u2]
    h = u2[1] - u2[0]
    found = [0.5 * (u2[j] + u2[j + 1]) for j in range(u2.size - 1) if regimes[j] != regimes[j + 1]]
    exact = []
    if u1 < 0:
        z = math.sqrt(-32.0 * u1 ** 3 / 27.0)
        exact = [r for r in (-z, z) if lo <= r <= hi]
    offsets = [min((abs(f - e) for f in found), default=math.inf) / h for e in exact]
    passed = len(found) == len(exact) and all(o <= 1.0 for o in offsets)
    report = {"sweep": "discriminant", "u1": u1, "u2": u2,
              "regimes": [r.value for r in regimes], "boundaries_found": found,
              "boundaries_exact": exact, "offset_in_cells": offsets,
              "discriminant": discriminant_n3(u1, u2)}
    return report, passed


def _classify_field(cfg: RunConfig) -> tuple[dict, bool]:
    t, x, data, names = io.read_frame_csv(cfg.init_csv)
    if names == ("w", "v"):
        data = reduction.lift_coeffs(data[0], data[1])
    cells = []
    counts: dict[str, int] = {}
    for j in range(x.size):
        d = spectral.classify_state(data[:, j])
        counts[d.regime.value] = counts.get(d.regime.value, 0) + 1
        cells.append({"x": x[j], "regime": d.regime.value, "borderline": d.borderline,
                      "eigenvalues": [complex(z) for z in d.eigenvalues]})
    return {"source": str(cfg.init_csv), "t": t, "counts": counts, "cells": cells}, True


def cmd_classify(cfg: RunConfig) -> int:
    if cfg.sweep == "reduced":
        report, ok = _classify_reduced(cfg)
    elif cfg.sweep == "discriminant":
        report, ok = _classify_discriminant(cfg)
    elif cfg.sweep:
        raise UsageError(f"unknown sweep {cfg.sweep!r}; choose reduced or discriminant")
    elif cfg.init_csv:
        report, ok = _classify_field(cfg)
    else:
        report, ok = _spectral_summary(_state(cfg)), True
    report["passed"] = ok
    path = _finish(cfg, report, "classify.json")
    print(f"classify: wrote {path}" + ("" if ok else " (boundary or sign check failed)"))
    return 0 if ok else 1


# -- simulate --------------------------------------------------------------

def _initial_data(cfg: RunConfig, grid: solver.Grid1D):
    """Return (kind, array) with kind '2x2' or 'quasilinear'."""
    if cfg.init_csv:
        t, x, data, names = io.read_frame_csv(cfg.init_csv)
        return ("2x2" if names == ("w", "v") else "quasilinear"), data, io.grid_from_x(x)
    name = cfg.init or "autonomous-n3"
    P = cfg.params
    if name == "autonomous-n3":
        return "quasilinear", checks.autonomous_initial(
            grid.x, amp=P.get("amp", 0.1), offset=P.get("offset", 0.0)), grid
    if name == "reduced-smooth":
        w, v = reduced_smooth(grid.x, P)
        return "2x2", np.stack([w, v]), grid
    if name == "constant":
        U = np.array(cfg.state, float) if cfg.state else np.full(cfg.n, P.get("value", 0.0))
        return "quasilinear", np.repeat(U[:, None], grid.N, axis=1), grid
    raise UsageError(f"unknown builtin {name!r}; available: {', '.join(BUILTINS)}")


def reduced_smooth(x, params: dict | None = None):
    P = params or {}
    w = P.get("w0", 1.0) + P.get("w_amp", 0.1) * np.sin(2 * np.pi * x)
    v = P.get("v0", 0.5) + P.get("v_amp", 0.05) * np.cos(2 * np.pi * x)
    return w, v


def _run(kind: str, U0: np.ndarray, grid: solver.Grid1D, sim: solver.SimConfig):
    if kind == "2x2":
        return solver.simulate_2x2(U0[0], U0[1], grid, sim)
    return solver.simulate_quasilinear(U0, grid, sim)


def _lifted_table(cfg: RunConfig, U0_fn, sim_for) -> list[dict]:
    rows = []
    for N in (cfg.grid // 4, cfg.grid // 2, cfg.grid):
        if N < 16:
            continue
        g = solver.Grid1D(N)
        w, v = U0_fn(g.x)
        tr = solver.simulate_2x2(w, v, g, sim_for(g))
        lifted = solver.lift_trajectory(tr)
        row = {"N": N, "completed": tr.complete(cfg.tmax)}
        if lifted.t.size >= 3:
            row.update(solver.system_residual(lifted).to_dict())
        rows.append(row)
    sups = [r.get("sup", math.nan) for r in rows]
    for r, order in zip(rows[1:], solver.self_convergence(sups)):
        r["order"] = order
    return rows


def cmd_simulate(cfg: RunConfig) -> int:
    grid = solver.Grid1D(cfg.grid)
    kind, U0, grid = _initial_data(cfg, grid)

    def sim_for(g):
        return solver.SimConfig(cfl=cfg.cfl, tmax=cfg.tmax, visc=cfg.viscosity,
                                frame_dt=cfg.frame_dt or None)

    traj = _run(kind, U0, grid, sim_for(grid))
    out = _out(cfg)
    io.write_trajectory(traj, out / "frames")
    io.write_plot_script(out)
    completed = traj.complete(cfg.tmax)
    report = {"kind": kind, "init": cfg.init_csv or cfg.init or "autonomous-n3",
              "metadata": traj.metadata, "frames": int(traj.t.size),
              "t_final": float(traj.t[-1]), "completed": completed,
              "blowup": traj.blowup.to_dict(),
              "max_change_from_initial": float(np.abs(traj.final - traj.frames[0]).max())}
    if kind == "quasilinear" and traj.t.size >= 3:
        report["lax_residual"] = solver.conservation_residual(traj, (-1.0, 0.0, 1.0))
    if kind == "2x2" and not cfg.init_csv:
        report["lifted_residual"] = _lifted_table(
            cfg, lambda x: reduced_smooth(x, cfg.params),
            lambda g: solver.SimConfig(cfl=cfg.cfl, tmax=cfg.tmax, frame_dt=g.dx))
    path = _finish(cfg, report, "report.json")
    print(f"simulate: {traj.t.size} frames to t={traj.t[-1]:.6g}, report {path}")
    if not completed:
        print(f"simulate: run stopped early ({traj.blowup.reason})", file=sys.stderr)
    return 0 if completed else 1


# -- reduce-lift -----------------------------------------------------------

def cmd_reduce_lift(cfg: RunConfig) -> int:
    if cfg.init_csv:
        t, x, data, names = io.read_frame_csv(cfg.init_csv)
        if names != ("w", "v"):
            raise UsageError(f"reduce-lift needs a (w, v) frame, got columns {names}")
        U = reduction.lift_coeffs(data[0], data[1])
        path = io.write_frame_csv(_out(cfg) / "lifted.csv", t, x, U, ("u1", "u2", "u3", "u4"))
        print(f"reduce-lift: wrote {path}")
        return 0
    w, v = _state(cfg, 2)
    s = reduction.ReducedState(float(w), float(v))
    fd = reduction.FactorData.from_state(s)
    U = reduction.lift_coeffs(w, v)
    eigs = np.sort_complex(np.linalg.eigvals(spectral.build_A(U)))
    l1, l2 = reduction.eigs2(s)
    expected = np.sort_complex(np.array([fd.f, fd.g, l1, l2], complex))
    mismatch = float(np.abs(eigs - expected).max())
    report = {"state": {"w": w, "v": v}, "factors": {"f": fd.f, "g": fd.g, "a": fd.a},
              "lifted": U, "eigenvalues_A": [complex(z) for z in eigs],
              "eigenvalues_expected": [complex(z) for z in expected],
              "eigenvalue_mismatch": mismatch, "reduced_eigenvalues": [l1, l2]}
    if (w, v) != (0.0, 0.0):
        report["nonlinearity_1"] = reduction.nonlinearity1(s)
    ok = mismatch <= 1e-8 * (1.0 + float(np.abs(expected).max()))
    report["passed"] = ok
    path = _finish(cfg, report, "reduce_lift.json")
    print(f"reduce-lift: eigenvalue mismatch {mismatch:.3g}, report {path}")
    return 0 if ok else 1


# -- travelwave ------------------------------------------------------------

def cmd_travelwave(cfg: RunConfig) -> int:
    spec = wavegen.travelwave(cfg.n, cfg.mu, cfg.constants or None)
    report = {"n": cfg.n, "mu": str(spec.mu), "constants": [str(c) for c in spec.constants],
              "components": [str(P.as_expr()) for P in spec.component_polys],
              "constraint": str(spec.constraint.as_expr()),
              "admissibility": spec.admissibility.value, "notes": spec.notes,
              "hamiltonian_form": (str(spec.hamiltonian_form.as_expr())
                                   if spec.hamiltonian_form is not None else None)}
    if "amp" in cfg.params and spec.admissibility is wavegen.Admissibility.FREE:
        grid = solver.Grid1D(cfg.grid)
        u = cfg.params.get("offset", 0.0) + cfg.params["amp"] * np.cos(2 * np.pi * grid.x)
        U = spec.components(u)
        names = tuple(f"u{k}" for k in range(1, cfg.n + 1))
        report["profile_csv"] = str(io.write_frame_csv(_out(cfg) / "profile.csv", 0.0,
                                                       grid.x, U, names))
    path = _finish(cfg, report, "travelwave.json")
    print(f"travelwave: {spec.admissibility.value}, constraint {report['constraint']}, "
          f"report {path}")
    return 0


# -- strata ----------------------------------------------------------------

def cmd_strata(cfg: RunConfig) -> int:
    U = _state(cfg)
    F = polyfam.LaxPoly(U)
    cs = polyfam.critical_points(F)
    strat = polyfam.classify_stratum(F)
    report = {"state": U, "signature": cs.signature, "ambiguous": strat.ambiguous,
              "candidates": strat.candidates,
              "points": [complex(z) for z in cs.points], "multiplicities": cs.multiplicities,
              "values": [complex(z) for z in cs.values],
              "jacobian": [[complex(z) for z in row]
                           for row in polyfam.critical_value_jacobian(F, cs)]}
    for label, on in (("continuation_vandermonde", False), ("continuation_stratum", True)):
        try:
            report[label] = {"dU": polyfam.constant_value_continuation(F, on_stratum=on)}
        except polyfam.StratumDegeneracyError as exc:
            report[label] = {"error": str(exc)}
    path = _finish(cfg, report, "strata.json")
    print(f"strata: signature {cs.signature}, report {path}")
    return 0


# -- verify ----------------------------------------------------------------

def cmd_verify(cfg: RunConfig) -> int:
    ids = list(cfg.checks) or list(checks.CHECKS)
    unknown = [i for i in ids if i not in checks.CHECKS]
    if unknown:
        raise UsageError(f"unknown check id(s) {unknown}; available: {', '.join(checks.CHECKS)}")
    tol = dict(cfg.tol)
    scale = tol.pop("scale", 1.0)
    results = []
    for i in ids:
        r = checks.run_check(i, scale=scale, overrides=tol)
        print(r.line(), flush=True)
        results.append(r)
    passed = all(r.passed for r in results)
    report = {"scale": scale, "overrides": tol, "all_passed": passed,
              "checks": [r.to_dict() for r in results]}
    path = _finish(cfg, report, "verify.json")
    print(f"verify: {sum(r.passed for r in results)}/{len(results)} passed, report {path}")
    return 0 if passed else 1


HANDLERS = {"classify": cmd_classify, "simulate": cmd_simulate, "reduce-lift": cmd_reduce_lift,
            "travelwave": cmd_travelwave, "strata": cmd_strata, "verify": cmd_verify}
assert set(HANDLERS) == set(COMMANDS)


def _thread_limit():
    raw = os.environ.get("BENNEY_LAB_THREADS")
    if not raw:
        return nullcontext()
    try:
        limit = int(raw)
    except ValueError:
        raise UsageError(f"BENNEY_LAB_THREADS must be an integer, got {raw!r}") from None
    return threadpool_limits(limits=max(1, limit))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        with _thread_limit():
            return HANDLERS[cfg.command](cfg)
    except (ConfigError, UsageError, io.FrameParseError, OSError) as exc:
        print(f"benney-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
