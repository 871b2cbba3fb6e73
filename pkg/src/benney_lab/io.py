"""Frame CSV and run-report JSON.

Frame files have a header ``t,x,<component names>`` and one row per cell,
numbers written with ``%.17g`` so that reading them back is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .solver import Grid1D, Trajectory


class FrameParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_frame_csv(path, t: float, x: np.ndarray, data: np.ndarray,
                    names) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(["t", "x", *names]) + "\n")
        for j in range(x.size):
            fh.write(",".join([_fmt(t), _fmt(x[j]), *(_fmt(v) for v in data[:, j])]) + "\n")
    return path


def write_trajectory(traj: Trajectory, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    x = traj.grid.x
    return [write_frame_csv(directory / f"frame_{k:05d}.csv", tk, x, F, traj.names)
            for k, (tk, F) in enumerate(zip(traj.t, traj.frames))]


def read_frame_csv(path):
    """Return (t, x, data (m, N), names); errors carry the offending line number."""
    path = Path(path)
    rows, t_val = [], None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FrameParseError(path, 1, "empty file") from None
        if len(header) < 3 or header[:2] != ["t", "x"]:
            raise FrameParseError(path, 1, "header must start with t,x and name components")
        names = tuple(h.strip() for h in header[2:])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FrameParseError(path, lineno,
                                      f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise FrameParseError(path, lineno, str(exc)) from None
            if not all(math.isfinite(v) for v in vals):
                raise FrameParseError(path, lineno, "non-finite value")
            if t_val is None:
                t_val = vals[0]
            elif vals[0] != t_val:
                raise FrameParseError(path, lineno, "mixed time stamps in one frame")
            rows.append(vals)
    if not rows:
        raise FrameParseError(path, 2, "no data rows")
    arr = np.array(rows)
    return t_val, arr[:, 1], arr[:, 2:].T.copy(), names


def grid_from_x(x: np.ndarray) -> Grid1D:
    """Recover the periodic grid from cell centres."""
    N = x.size
    dx = (x[-1] - x[0]) / (N - 1) if N > 1 else 1.0
    return Grid1D(N, L=float(round(N * dx, 12)))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


PLOT_SCRIPT = '''"""Plot frames written by benney-lab; run with python plot_frames.py."""
import glob
import os

import matplotlib.pyplot as plt
import pandas as pd

here = os.path.dirname(os.path.abspath(__file__))
files = sorted(glob.glob(os.path.join(here, "frames", "frame_*.csv")))
frames = [pd.read_csv(f) for f in files]
names = [c for c in frames[0].columns if c not in ("t", "x")]
fig, axes = plt.subplots(len(names), 1, figsize=(7, 2.2 * len(names)), sharex=True)
axes = axes if len(names) > 1 else [axes]
picks = frames[:: max(1, len(frames) // 6)] + [frames[-1]]
for ax, name in zip(axes, names):
    for df in picks:
        ax.plot(df["x"], df[name], label=f"t={df['t'].iloc[0]:.3g}")
    ax.set_ylabel(name)
axes[0].legend(fontsize=7)
axes[-1].set_xlabel("x")
fig.tight_layout()
fig.savefig(os.path.join(here, "frames.png"), dpi=120)
'''


def write_plot_script(directory) -> Path:
    path = Path(directory) / "plot_frames.py"
    path.write_text(PLOT_SCRIPT)
    return path
