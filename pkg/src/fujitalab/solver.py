"""Time integration of d/dt u = J*u - u + f(u) with blow-up detection.

Strang splitting: half a step of the exact linear propagator, a full
pointwise reaction step, another linear half step.  The reaction step is
solved in closed form for Bernoulli-type growth a u^{1+p} - b u (which
includes the pure power u^{1+p}) and with classical RK4 otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from scipy import stats

from .grid import Field, boundary_mask
from .kernels import Kernel
from .semigroup import DiscreteKernel, LinearPropagator, _as_discrete

# ---------------------------------------------------------------------------
# reactions


class BlowupSignal(Exception):
    """The pointwise reaction step became singular within the step."""

    def __init__(self, cell: tuple[int, ...], value: float):
        super().__init__(f"reaction step singular at cell {cell} (u = {value:.3e})")
        self.cell = cell
        self.value = value


@dataclass(frozen=True)
class Bernoulli:
    """f(u) = a u^{1+p} - b u, integrated exactly."""

    p: float
    a: float = 1.0
    b: float = 0.0
    name = "bernoulli"

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.a <= 0 or self.b < 0:
            raise ValueError("need a > 0 and b >= 0")

    def rate(self, u: np.ndarray) -> np.ndarray:
        up = np.maximum(u, 0.0)
        return self.a * up ** (1 + self.p) - self.b * u

    def substep(self, u: np.ndarray, dt: float) -> np.ndarray:
        p = self.p
        # x(t) = x0 e^{-bt} (1 - c(t) x0^p)^{-1/p} with c(t) = a (1 - e^{-pbt}) / b
        c = self.a * (-math.expm1(-p * self.b * dt)) / self.b if self.b > 0 else self.a * p * dt
        denom = 1.0 - c * np.maximum(u, 0.0) ** p
        if np.any(denom <= 0.0):
            idx = np.unravel_index(int(np.argmin(denom)), u.shape)
            raise BlowupSignal(tuple(int(i) for i in idx), float(u[idx]))
        return u * math.exp(-self.b * dt) * denom ** (-1.0 / p)

    def to_config(self) -> dict:
        return {"type": self.name, "p": self.p, "a": self.a, "b": self.b}


class PureGrowth(Bernoulli):
    """f(u) = u^{1+p}."""

    name = "pure_growth"

    def __init__(self, p: float):
        super().__init__(p, 1.0, 0.0)

    def __repr__(self):
        return f"PureGrowth(p={self.p})"

    def to_config(self) -> dict:
        return {"type": self.name, "p": self.p}


def _rk4(rate: Callable[[np.ndarray], np.ndarray], u: np.ndarray, dt: float) -> np.ndarray:
    k1 = rate(u)
    k2 = rate(u + 0.5 * dt * k1)
    k3 = rate(u + 0.5 * dt * k2)
    k4 = rate(u + dt * k3)
    return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True)
class AlleeLogistic:
    """f(u) = u^{1+p} (1 - u)."""

    p: float
    name = "allee_logistic"

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")

    def rate(self, u):
        up = np.maximum(u, 0.0)
        return up ** (1 + self.p) * (1.0 - u)

    def substep(self, u, dt):
        return _rk4(self.rate, u, dt)

    def to_config(self) -> dict:
        return {"type": self.name, "p": self.p}


@dataclass(frozen=True)
class Custom:
    """User reaction f sandwiched as m u^{1+p}(1-u) <= f(u) <= M u^{1+p}(1-u) on [0, 1]."""

    f: Callable[[np.ndarray], np.ndarray]
    p: float
    m: float
    M: float
    name = "custom"

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not 0 < self.m <= self.M:
            raise ValueError("need 0 < m <= M")
        s = np.linspace(0.0, 1.0, 1000)
        base = s ** (1 + self.p) * (1 - s)
        fs = np.asarray(self.f(s), dtype=float)
        tol = 1e-12
        if np.any(fs < self.m * base - tol) or np.any(fs > self.M * base + tol):
            raise ValueError("custom reaction violates the sandwich bounds on [0, 1]")

    def rate(self, u):
        return np.asarray(self.f(np.maximum(u, 0.0)), dtype=float)

    def substep(self, u, dt):
        return _rk4(self.rate, u, dt)

    def to_config(self) -> dict:
        return {"type": self.name, "p": self.p, "m": self.m, "M": self.M}


Reaction = Bernoulli | AlleeLogistic | Custom


def reaction_from_config(cfg: dict) -> Reaction:
    cfg = dict(cfg)
    kind = cfg.pop("type", "pure_growth")
    if "p" not in cfg:
        raise ValueError("reaction config lacks 'p'")
    p = float(cfg.pop("p"))
    if kind == "pure_growth":
        reaction: Reaction = PureGrowth(p)
    elif kind == "allee_logistic":
        reaction = AlleeLogistic(p)
    elif kind == "bernoulli":
        reaction = Bernoulli(p, float(cfg.pop("a", 1.0)), float(cfg.pop("b", 0.0)))
    else:
        raise ValueError(f"unknown reaction type {kind!r} (custom reactions are code-only)")
    if cfg:
        raise ValueError(f"unknown reaction keys: {sorted(cfg)}")
    return reaction


# ---------------------------------------------------------------------------
# configuration and outcomes


@dataclass(frozen=True)
class SolverConfig:
    dt_init: float = 0.05
    dt_min: float = 1e-30
    dt_max: float = 1.0
    safety: float = 0.5
    U_max: float = 1e8
    t_max: float = 100.0
    snapshot_stride: int = 100
    max_growth: float = 1.2
    adaptive: bool = True
    decay_ratio: float = 1e-6
    tail_certificate: bool = True
    tail_margin: float = 0.5
    hair_R: float = 5.0
    hair_eps: float = 0.01
    local_R: float = 5.0
    contamination: float = 1e-4
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.dt_min < self.dt_init:
            raise ValueError("need 0 < dt_min < dt_init")
        if self.dt_max < self.dt_init:
            raise ValueError("need dt_max >= dt_init")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.U_max > 1:
            raise ValueError("U_max must exceed 1")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")


@dataclass(frozen=True)
class Blowup:
    t_star: float
    t_last: float
    heuristic: bool = True
    kind = "blowup"


@dataclass(frozen=True)
class GlobalDecay:
    slope: float | None
    certified_by: str = "threshold"
    kind = "global_decay"


@dataclass(frozen=True)
class ConvergeToOne:
    t_hit: float
    kind = "converge_to_one"


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    kind = "inconclusive"


SimOutcome = Blowup | GlobalDecay | ConvergeToOne | Inconclusive


def outcome_to_dict(outcome: SimOutcome) -> dict:
    d = {"kind": outcome.kind}
    d.update(outcome.__dict__)
    return d


@dataclass
class History:
    """Per-step diagnostics of a run."""

    t: list[float] = field(default_factory=list)
    linf: list[float] = field(default_factory=list)
    l1: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    localized_mass: list[float] = field(default_factory=list)
    reaction_integral: list[float] = field(default_factory=list)
    dt: list[float] = field(default_factory=list)
    p: float = 1.0

    def __len__(self):
        return len(self.t)

    def record(self, t, v: np.ndarray, cell: float, dt, local_mask, p):
        self.t.append(float(t))
        self.linf.append(float(np.max(np.abs(v))))
        self.l1.append(float(cell * np.abs(v).sum()))
        self.mass.append(float(cell * v.sum()))
        self.localized_mass.append(float(cell * v[local_mask].sum()) if local_mask is not None
                                   else float("nan"))
        self.reaction_integral.append(float(cell * (np.maximum(v, 0.0) ** (1 + p)).sum()))
        self.dt.append(float(dt))

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(getattr(self, k)) for k in
                ("t", "linf", "l1", "mass", "localized_mass", "reaction_integral", "dt")}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "Linf", "L1", "localized_mass", "dt"])
            for row in zip(self.t, self.linf, self.l1, self.localized_mass, self.dt):
                w.writerow([repr(x) for x in row])


@dataclass
class RunResult:
    outcome: SimOutcome
    history: History
    snapshots: list[tuple[float, Field]]
    final: Field
    notes: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# stepping


class Stepper:
    """Strang step for a fixed kernel/grid/reaction."""

    def __init__(self, kernel: Kernel | DiscreteKernel, grid, reaction: Reaction):
        self.dk = _as_discrete(kernel, grid)
        self.prop = LinearPropagator(self.dk)
        self.reaction = reaction

    def __call__(self, values: np.ndarray, dt: float) -> np.ndarray:
        half = 0.5 * dt
        v = self.prop.apply(values, half)
        v = self.reaction.substep(v, dt)
        return self.prop.apply(v, half)


def step(u: Field, kernel: Kernel | DiscreteKernel, reaction: Reaction, dt: float) -> Field:
    """One Strang step; raises BlowupSignal if the reaction step is singular."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not np.all(np.isfinite(u.values)):
        raise ValueError("field is not finite")
    return Field(u.grid, Stepper(kernel, u.grid, reaction)(u.values, dt))


def extrapolate_blowup_time(t: np.ndarray, linf: np.ndarray, p: float,
                            level: float = 1e3, points: int = 20) -> float:
    """Fit Linf^{-p} = c (t* - t) on the last ``points`` records above ``level``."""
    sel = np.nonzero(linf > level)[0]
    # float time stops advancing for steps far below its resolution
    _, first = np.unique(t[sel][::-1], return_index=True)
    sel = np.sort(sel[::-1][first])[-points:]
    if len(sel) < 3:
        return float(t[-1])
    y = linf[sel] ** (-p)
    res = stats.linregress(t[sel], y)
    if res.slope >= 0:
        return float(t[-1])
    return float(max(-res.intercept / res.slope, t[sel][-1]))


def _tail_slope(hist: History, frac: float = 0.25) -> tuple[float, float] | None:
    """Power-law fit log Linf = c + s log t on the last part of the run."""
    t = np.asarray(hist.t)
    linf = np.asarray(hist.linf)
    if len(t) < 5 or t[-1] <= 1.0:
        return None
    t_lo = max(1.0, frac * t[-1])
    sel = (t >= t_lo) & (linf > 0)
    if sel.sum() < 5:
        return None
    res = stats.linregress(np.log(t[sel]), np.log(linf[sel]))
    return float(res.slope), float(res.intercept)


def _tail_amplification(slope, intercept, t_end, p) -> float:
    """p * int_{t_end}^inf (c t^s)^p dt for the fitted tail; < 1 means bounded growth."""
    ps = p * slope
    if ps >= -1.0:
        return math.inf
    c_p = math.exp(p * intercept)
    return p * c_p * t_end ** (ps + 1) / (-(ps + 1))


def run(u0: Field, kernel: Kernel | DiscreteKernel, reaction: Reaction,
        cfg: SolverConfig = SolverConfig()) -> RunResult:
    """Integrate to ``cfg.t_max`` or until the outcome is decided."""
    if np.any(u0.values < 0):
        raise ValueError("initial datum must be nonnegative")
    grid = u0.grid
    stepper = Stepper(kernel, grid, reaction)
    p = reaction.p
    hist = History(p=p)
    snapshots: list[tuple[float, Field]] = [(0.0, u0.copy())]
    u = u0.values.copy()
    t = 0.0
    dt = cfg.dt_init
    local_mask = grid.radius() <= cfg.local_R if cfg.local_R < grid.L else None
    edge = boundary_mask(grid)
    cell = grid.cell
    hist.record(t, u, cell, 0.0, local_mask, p)
    linf0 = hist.linf[0]
    # data that already reach the edge (e.g. constants) are judged against their initial share
    edge_share0 = cell * np.abs(u[edge]).sum() / hist.l1[0] if hist.l1[0] > 0 else 0.0
    hair = isinstance(reaction, (AlleeLogistic, Custom))
    hair_mask = grid.radius() <= cfg.hair_R
    notes: dict = {}

    def finish(outcome):
        snapshots.append((t, Field(grid, u.copy())))
        return RunResult(outcome, hist, snapshots, Field(grid, u), notes)

    if linf0 == 0.0:
        return finish(GlobalDecay(None, "zero"))

    accepted = 0
    steps = 0
    while t < cfg.t_max - 1e-12 * cfg.t_max:
        steps += 1
        if steps > cfg.max_steps:
            return finish(Inconclusive("step budget exhausted"))
        dt_eff = min(dt, cfg.t_max - t)
        linf = hist.linf[-1]
        try:
            new = stepper(u, dt_eff)
            if not np.all(np.isfinite(new)):
                raise BlowupSignal((0,), math.inf)
        except BlowupSignal as sig:
            if cfg.adaptive and dt_eff > cfg.dt_min:
                dt = max(0.5 * dt_eff, cfg.dt_min)
                continue
            notes["singular_cell"] = list(sig.cell)
            if linf > cfg.U_max or not cfg.adaptive:
                t_star = extrapolate_blowup_time(np.asarray(hist.t), np.asarray(hist.linf), p)
                return finish(Blowup(t_star, t))
            return finish(Inconclusive("reaction step singular at dt_min below U_max"))
        new_linf = float(np.max(np.abs(new)))
        growth = new_linf / linf
        if cfg.adaptive and growth > cfg.max_growth and dt_eff > cfg.dt_min:
            dt = max(0.5 * dt_eff, cfg.dt_min)
            continue
        u = new
        t += dt_eff
        accepted += 1
        hist.record(t, u, cell, dt_eff, local_mask, p)
        if accepted % cfg.snapshot_stride == 0:
            snapshots.append((t, Field(grid, u.copy())))

        if new_linf > cfg.U_max:
            if not cfg.adaptive or dt_eff <= cfg.dt_min:
                t_star = extrapolate_blowup_time(np.asarray(hist.t), np.asarray(hist.linf), p)
                return finish(Blowup(t_star, t))
            dt = max(0.5 * dt_eff, cfg.dt_min)
            continue
        l1 = hist.l1[-1]
        if cell * np.abs(u[edge]).sum() > (edge_share0 + cfg.contamination) * l1:
            return finish(Inconclusive("boundary"))
        if hair and float(np.min(u[hair_mask])) >= 1.0 - cfg.hair_eps:
            return finish(ConvergeToOne(t))
        if new_linf < cfg.decay_ratio * linf0:
            fit = _tail_slope(hist)
            return finish(GlobalDecay(fit[0] if fit else None, "threshold"))
        if cfg.adaptive and growth < 1.0 + cfg.safety * (cfg.max_growth - 1.0):
            dt = min(dt_eff * 1.1, cfg.dt_max) if dt_eff == dt else dt

    fit = _tail_slope(hist)
    if cfg.tail_certificate and fit is not None:
        slope, intercept = fit
        amp = _tail_amplification(slope, intercept, t, p)
        notes["tail_amplification"] = amp
        if slope < 0 and amp < cfg.tail_margin:
            return finish(GlobalDecay(slope, "tail"))
    return finish(Inconclusive("t_max reached"))


def mass_ode_residual(hist: History, max_linf: float = 1e3) -> float:
    """Max relative gap between d/dt (total mass) and h^N sum u^{1+p}.

    The derivative is a second-order central difference on the recorded
    (possibly nonuniform) times; only records with Linf <= ``max_linf`` count.
    """
    arr = hist.arrays()
    t, m, rhs, linf = arr["t"], arr["mass"], arr["reaction_integral"], arr["linf"]
    keep = np.nonzero(linf <= max_linf)[0]
    if len(keep) < 3:
        return 0.0
    last = keep[-1] + 1
    t, m, rhs = t[:last], m[:last], rhs[:last]
    dm = np.gradient(m, t)
    inner = slice(1, len(t) - 1)
    scale = np.max(np.abs(rhs[inner]))
    if scale == 0.0:
        return float(np.max(np.abs(dm[inner])))
    return float(np.max(np.abs(dm[inner] - rhs[inner]) / np.maximum(np.abs(rhs[inner]), 1e-12 * scale)))


@dataclass(frozen=True)
class ComparisonReport:
    ordered: bool
    max_violation: float
    steps: int


def _fixed_steps(u: np.ndarray, stepper: Stepper, dt: float, t_max: float,
                 U_max: float) -> Iterator[np.ndarray]:
    t = 0.0
    while t < t_max - 1e-12:
        try:
            u = stepper(u, dt)
        except BlowupSignal:
            return
        if not np.all(np.isfinite(u)) or np.max(u) > U_max:
            return
        t += dt
        yield u


def comparison_check(u0_low: Field, u0_high: Field, kernel: Kernel | DiscreteKernel,
                     reaction: Reaction, cfg: SolverConfig = SolverConfig(),
                     tol: float = 1e-8) -> ComparisonReport:
    """Run both data with the same fixed step and check u_low <= u_high + tol throughout."""
    if np.any(u0_low.values > u0_high.values):
        raise ValueError("need u0_low <= u0_high pointwise")
    stepper = Stepper(kernel, u0_low.grid, reaction)
    dt = cfg.dt_init
    worst = float(np.max(u0_low.values - u0_high.values))
    n = 0
    low = _fixed_steps(u0_low.values.copy(), stepper, dt, cfg.t_max, cfg.U_max)
    high = _fixed_steps(u0_high.values.copy(), stepper, dt, cfg.t_max, cfg.U_max)
    for a, b in zip(low, high):
        worst = max(worst, float(np.max(a - b)))
        n += 1
    return ComparisonReport(worst <= tol, max(worst, 0.0), n)


def fixed_step_config(cfg: SolverConfig, dt: float) -> SolverConfig:
    """Copy of ``cfg`` that steps with constant ``dt``."""
    return replace(cfg, dt_init=dt, dt_max=dt, dt_min=min(cfg.dt_min, dt / 2), adaptive=False)
