"""Experiment configuration files (TOML) and their validation.

A run config has the sections ``[kernel]``, ``[grid]``, ``[reaction]``,
``[initial]``, ``[solver]`` and ``[outputs]``; a sweep plan replaces
``[kernel]`` by a ``[[kernels]]`` array and adds ``[sweep]``.  See
``configs/`` for annotated examples and README.md for the full schema.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .grid import Field, Grid, GridError, indicator, radial_field
from .kernels import Kernel, KernelError, kernel_from_config
from .solver import Reaction, SolverConfig, reaction_from_config


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


SECTIONS = {"kernel", "grid", "reaction", "initial", "solver", "outputs"}
INITIAL_TYPES = ("bump", "compact_bump", "indicator", "constant", "zero")
OUTPUT_KEYS = {"snapshots": True, "diagnostics_csv": True, "svg": False}


def load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form; independent of key order."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


def initial_field(spec: dict, grid: Grid) -> Field:
    """Build u0 from an ``[initial]`` table.

    bump: amplitude * exp(-|x|^2 / (2 width^2)); compact_bump: amplitude *
    exp(1 - 1/(1 - (|x|/width)^2)) inside |x| < width; indicator: level on
    |x| <= radius; constant: level everywhere; zero.
    """
    spec = dict(spec)
    kind = spec.pop("type", "bump")
    if kind not in INITIAL_TYPES:
        raise ConfigError(f"unknown initial type {kind!r}; choose from {INITIAL_TYPES}")
    if kind == "zero":
        out = Field(grid, np.zeros(grid.shape))
    elif kind == "constant":
        out = Field(grid, np.full(grid.shape, float(spec.pop("level", 1.0))))
    elif kind == "indicator":
        radius = float(spec.pop("radius", 1.0))
        out = indicator(grid, radius, float(spec.pop("level", 1.0)))
    else:
        amp = float(spec.pop("amplitude", 1.0))
        width = float(spec.pop("width", 1.0))
        if width <= 0:
            raise ConfigError("initial width must be positive")
        if kind == "bump":
            out = radial_field(lambda r: amp * np.exp(-0.5 * (r / width) ** 2), grid)
        else:
            def prof(r):
                s = np.clip(r / width, 0.0, 1.0)
                with np.errstate(divide="ignore", over="ignore"):
                    v = np.exp(1.0 - 1.0 / (1.0 - s**2))
                return amp * np.where(s < 1.0, v, 0.0)
            out = radial_field(prof, grid)
    if spec:
        raise ConfigError(f"unknown [initial] keys: {sorted(spec)}")
    if np.any(out.values < 0):
        raise ConfigError("initial datum must be nonnegative")
    return out


def solver_config(spec: dict) -> SolverConfig:
    names = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(spec) - names
    if unknown:
        raise ConfigError(f"unknown [solver] keys: {sorted(unknown)}")
    try:
        return SolverConfig(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[solver]: {exc}") from exc


def grid_from_config(spec: dict) -> Grid:
    unknown = set(spec) - {"dim", "L", "M"}
    if unknown:
        raise ConfigError(f"unknown [grid] keys: {sorted(unknown)}")
    try:
        return Grid(int(spec.get("dim", 1)), float(spec["L"]), int(spec["M"]))
    except KeyError as exc:
        raise ConfigError(f"[grid] lacks {exc}") from exc
    except GridError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc


def kernel_section(spec: dict, dim: int, base_dir: Path | None) -> Kernel:
    spec = dict(spec)
    spec.setdefault("dim", dim)
    if int(spec["dim"]) != dim:
        raise ConfigError(f"kernel dim {spec['dim']} differs from grid dim {dim}")
    try:
        return kernel_from_config(spec, base_dir)
    except (KernelError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"[kernel]: {exc}") from exc


@dataclass
class RunConfig:
    """Validated single-run configuration."""

    raw: dict
    kernel: Kernel
    grid: Grid
    reaction: Reaction
    u0: Field
    solver: SolverConfig
    outputs: dict

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def parse_run_config(raw: dict, base_dir: str | Path | None = None) -> RunConfig:
    raw = copy.deepcopy(raw)
    unknown = set(raw) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for needed in ("kernel", "grid", "reaction"):
        if needed not in raw:
            raise ConfigError(f"missing [{needed}] section")
    base = Path(base_dir) if base_dir is not None else None
    grid = grid_from_config(raw["grid"])
    kernel = kernel_section(raw["kernel"], grid.dim, base)
    try:
        reaction = reaction_from_config(raw["reaction"])
    except ValueError as exc:
        raise ConfigError(f"[reaction]: {exc}") from exc
    u0 = initial_field(raw.get("initial", {"type": "bump"}), grid)
    solver = solver_config(raw.get("solver", {}))
    outputs = dict(OUTPUT_KEYS)
    extra = set(raw.get("outputs", {})) - set(OUTPUT_KEYS)
    if extra:
        raise ConfigError(f"unknown [outputs] keys: {sorted(extra)}")
    outputs.update(raw.get("outputs", {}))
    return RunConfig(raw, kernel, grid, reaction, u0, solver, outputs)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_run_config(load_toml(path), path.parent)


@dataclass
class SweepPlan:
    """Kernels x exponents grid sharing one grid, initial datum and solver setup."""

    kernels: list[dict]
    ps: list[float]
    dim: int
    grid: dict
    initial: dict
    solver: dict
    reaction_type: str = "pure_growth"
    jobs: int = 1
    out_dir: str = "sweep_out"
    base_dir: str | None = None

    def __post_init__(self):
        if not self.kernels:
            raise ConfigError("sweep needs at least one kernel")
        if not self.ps:
            raise ConfigError("sweep needs a nonempty p list")
        if any(not p > 0 for p in self.ps):
            raise ConfigError("all p must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def cell_configs(self) -> list[tuple[int, int, dict]]:
        """(kernel index, p index, run config) in deterministic order."""
        cells = []
        for i, kcfg in enumerate(self.kernels):
            for j, p in enumerate(self.ps):
                raw = {
                    "kernel": dict(kcfg),
                    "grid": dict(self.grid, dim=self.dim),
                    "reaction": {"type": self.reaction_type, "p": float(p)},
                    "initial": dict(self.initial),
                    "solver": dict(self.solver),
                }
                cells.append((i, j, raw))
        return cells


def parse_sweep_plan(raw: dict, base_dir: str | Path | None = None) -> SweepPlan:
    allowed = {"sweep", "kernels", "grid", "initial", "solver"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown sweep sections: {sorted(unknown)}")
    sw = dict(raw.get("sweep", {}))
    kernels = raw.get("kernels", [])
    if not isinstance(kernels, list):
        raise ConfigError("[[kernels]] must be an array of tables")
    if "grid" not in raw:
        raise ConfigError("missing [grid] section")
    grid = dict(raw["grid"])
    dim = int(grid.pop("dim", sw.pop("dim", 1)))
    try:
        plan = SweepPlan(
            kernels=[dict(k) for k in kernels],
            ps=[float(p) for p in sw.pop("p", [])],
            dim=dim,
            grid=grid,
            initial=dict(raw.get("initial", {"type": "bump"})),
            solver=dict(raw.get("solver", {})),
            reaction_type=str(sw.pop("reaction", "pure_growth")),
            jobs=int(sw.pop("jobs", 1)),
            out_dir=str(sw.pop("out_dir", "sweep_out")),
            base_dir=str(base_dir) if base_dir is not None else None,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[sweep]: {exc}") from exc
    if sw:
        raise ConfigError(f"unknown [sweep] keys: {sorted(sw)}")
    # validate every cell up front so config errors surface before any work
    for _, _, cell in plan.cell_configs():
        parse_run_config(cell, base_dir)
    return plan


def load_sweep_plan(path: str | Path) -> SweepPlan:
    path = Path(path)
    return parse_sweep_plan(load_toml(path), path.parent)
