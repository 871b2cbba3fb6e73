"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments. Dotted keys ``tol.<name>`` and
``init.<name>`` collect tolerance overrides and builtin-initial-data
parameters. Any other unknown key is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

COMMANDS = ("classify", "simulate", "reduce-lift", "travelwave", "strata", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "verify"
    n: int = 3
    grid: int = 256
    cfl: float = 0.45
    tmax: float = 1.0
    viscosity: float = 0.0
    frame_dt: float = 0.0
    init: str = ""
    init_csv: str = ""
    state: tuple[float, ...] = ()
    mu: str = "0"
    constants: tuple[str, ...] = ()
    sweep: str = ""
    samples: int = 101
    out: str = "benney_out"
    seed: int = 0
    checks: tuple[str, ...] = ()
    tol: dict[str, float] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        for name in ("cfl", "tmax"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and positive, got {v}")
        for name in ("viscosity", "frame_dt"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {v}")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.grid < 16:
            raise ConfigError("grid must have at least 16 cells")
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")
        for k, v in {**self.tol, **self.params}.items():
            if not math.isfinite(v):
                raise ConfigError(f"{k} must be finite")
        if any(not math.isfinite(s) for s in self.state):
            raise ConfigError("state entries must be finite")
        return self


_SCALAR = {f.name: f for f in fields(RunConfig) if f.name not in ("tol", "params")}


def _convert(key: str, raw: str):
    f = _SCALAR[key]
    typ = f.type
    raw = raw.strip()
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "tuple[float, ...]":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if typ == "tuple[str, ...]":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def apply(cfg: RunConfig, key: str, raw: str) -> RunConfig:
    key = key.strip()
    if key.startswith("tol."):
        cfg.tol[key[4:]] = _float(key, raw)
    elif key.startswith("init."):
        cfg.params[key[5:]] = _float(key, raw)
    elif key in _SCALAR:
        setattr(cfg, key, _convert(key, raw))
    else:
        raise ConfigError(f"unknown config key {key!r}")
    return cfg


def _float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = line.split("=", 1)
        try:
            apply(cfg, key, raw)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load(path) -> RunConfig:
    return parse(Path(path).read_text())


def _render(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_render(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: RunConfig) -> str:
    lines = [f"{name} = {_render(getattr(cfg, name))}" for name in _SCALAR]
    lines += [f"tol.{k} = {v!r}" for k, v in sorted(cfg.tol.items())]
    lines += [f"init.{k} = {v!r}" for k, v in sorted(cfg.params.items())]
    return "\n".join(lines) + "\n"
