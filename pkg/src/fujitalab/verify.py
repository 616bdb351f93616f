"""Invariant suite behind ``fujitalab verify``.

Every check is small (desk scale, a few seconds at most) and returns a
``CheckResult``.  ``mass_scale`` multiplies the discrete kernel mass so
that the suite can be run against a deliberately corrupted kernel.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import (ball_constant_C_N, ball_shift_check, bound_crossing, kaplan_f,
                          kaplan_f_dual)
from .grid import Grid, norms, radial_field
from .kernels import Gaussian, Laplace, estimate_expansion
from .semigroup import discretize, evolve_linear, profile_G_A, psi_mass, series_K
from .solver import AlleeLogistic, Bernoulli, SolverConfig, comparison_check, run, step


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0


@dataclass
class SuiteContext:
    seed: int = 0
    mass_scale: float = 1.0


def _bump(grid: Grid, amp: float = 1.0, width: float = 1.0):
    return radial_field(lambda r: amp * np.exp(-0.5 * (r / width) ** 2), grid)


def check_oracle(ctx: SuiteContext) -> CheckResult:
    g = Grid(1, 20.0, 256)
    dk = discretize(Gaussian(), g, ctx.mass_scale)
    u0 = _bump(g)
    s = series_K(u0, dk, 1.0, tol=1e-11)
    err = float(np.max(np.abs(evolve_linear(u0, dk, 1.0).values - s.field.values)))
    return CheckResult("oracle_equivalence", err <= s.bound + 1e-8 and s.bound < 1e-10,
                       {"sup_error": err, "truncation_bound": s.bound, "terms": s.terms})


def check_psi_mass(ctx: SuiteContext) -> CheckResult:
    dk = discretize(Gaussian(), Grid(1, 40.0, 512), ctx.mass_scale)
    errs = {str(t): abs(psi_mass(dk, t) - (1 - math.exp(-t))) for t in (0.5, 1.0, 5.0)}
    return CheckResult("psi_mass_identity", max(errs.values()) <= 1e-6, {"abs_error": errs})


def check_mass_positivity(ctx: SuiteContext) -> CheckResult:
    g = Grid(1, 40.0, 512)
    dk = discretize(Laplace(), g, ctx.mass_scale)
    u0 = _bump(g)
    v = evolve_linear(u0, dk, 5.0)
    drift = abs(norms(v).L1 - norms(u0).L1)
    neg = float(np.min(v.values))
    return CheckResult("mass_and_positivity", drift <= 1e-10 and neg >= -1e-12,
                       {"l1_drift": drift, "min_value": neg})


def check_ball_constants(ctx: SuiteContext) -> CheckResult:
    c1, c2 = ball_constant_C_N(1), ball_constant_C_N(2)
    return CheckResult("ball_constant_closed_forms", c1 == 0.5 and abs(c2 - 1 / 3) <= 1e-10,
                       {"C1": c1, "C2_minus_third": c2 - 1 / 3})


def check_ball_shift(ctx: SuiteContext) -> CheckResult:
    reports = {
        "N=1": ball_shift_check(Gaussian(dim=1), 1000, seed=ctx.seed),
        "N=2": ball_shift_check(Gaussian(dim=2), 1000, seed=ctx.seed + 1),
    }
    return CheckResult("ball_shift_monte_carlo", all(r.holds for r in reports.values()),
                       {k: r.worst_ratio for k, r in reports.items()})


def check_kaplan_duality(ctx: SuiteContext) -> CheckResult:
    g = Grid(1, 20.0, 256)
    k = Gaussian()
    u0 = _bump(g)
    gaps = {}
    for t in (1.0, 5.0, 10.0):
        f = kaplan_f(k, u0, t)
        gaps[str(t)] = abs(f - kaplan_f_dual(k, u0, t)) / f
    return CheckResult("kaplan_duality", max(gaps.values()) <= 1e-4, {"relative_gap": gaps})


def check_bound_crossing(ctx: SuiteContext) -> CheckResult:
    # near p_F the crossing time grows like a huge power, hence the wide horizon
    exp = estimate_expansion(Gaussian())
    crossing = {str(p): bound_crossing(exp, p, 1.0, 1.0, t_max=1e60, samples=3000)
                for p in (0.5, 1.0, 1.9)}
    return CheckResult("subcritical_bound_crossing", all(v is not None for v in crossing.values()),
                       {"first_crossing_t": crossing})


def check_G_A(ctx: SuiteContext) -> CheckResult:
    ys = np.linspace(0.0, 5.0, 11)
    gauss = max(abs(profile_G_A(0.7, 2.0, y, 1) - math.exp(-y * y / 2.8) / math.sqrt(2.8 * math.pi))
                for y in ys)
    poisson = max(abs(profile_G_A(1.3, 1.0, y, 1) - 1.3 / (math.pi * (1.69 + y * y))) for y in ys)
    return CheckResult("G_A_closed_forms", max(gauss, poisson) <= 1e-6,
                       {"gaussian_error": gauss, "poisson_error": poisson})


def check_bernoulli_time(ctx: SuiteContext) -> CheckResult:
    g = Grid(1, 10.0, 32)
    u0 = radial_field(lambda r: np.full_like(r, 2.0), g)
    res = run(u0, Gaussian(), Bernoulli(1.0, 1.0, 1.0), SolverConfig(dt_init=0.01, t_max=5.0))
    t_star = getattr(res.outcome, "t_star", math.nan)
    rel = abs(t_star - math.log(2)) / math.log(2)
    return CheckResult("bernoulli_blowup_time", rel <= 1e-2,
                       {"t_star": t_star, "relative_error": rel})


def check_allee_bounds(ctx: SuiteContext) -> CheckResult:
    rng = np.random.default_rng(ctx.seed)
    g = Grid(1, 30.0, 256)
    u = radial_field(lambda r: np.exp(-0.5 * r**2), g)
    u.values[:] = np.clip(u.values + 0.3 * rng.uniform(size=g.shape), 0.0, 1.0)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        u = step(u, Gaussian(), AlleeLogistic(1.0), 0.1)
        lo, hi = min(lo, float(u.values.min())), max(hi, float(u.values.max()))
    return CheckResult("allee_invariant_interval", lo >= -1e-12 and hi <= 1 + 1e-8,
                       {"min": lo, "max": hi})


def check_comparison(ctx: SuiteContext) -> CheckResult:
    g = Grid(1, 30.0, 256)
    low = _bump(g, 0.3)
    rep = comparison_check(low, low * 2.0, Gaussian(), AlleeLogistic(1.0),
                           SolverConfig(dt_init=0.05, t_max=10.0))
    return CheckResult("comparison_principle", rep.ordered,
                       {"max_violation": rep.max_violation, "steps": rep.steps})


SUITE: list[Callable[[SuiteContext], CheckResult]] = [
    check_oracle,
    check_psi_mass,
    check_mass_positivity,
    check_ball_constants,
    check_ball_shift,
    check_kaplan_duality,
    check_bound_crossing,
    check_G_A,
    check_bernoulli_time,
    check_allee_bounds,
    check_comparison,
]


def run_suite(seed: int = 0, mass_scale: float = 1.0) -> list[CheckResult]:
    ctx = SuiteContext(seed, mass_scale)
    out = []
    for check in SUITE:
        t0 = time.perf_counter()
        try:
            res = check(ctx)
        except Exception as exc:
            res = CheckResult(check.__name__.removeprefix("check_"), False,
                              {"error": f"{type(exc).__name__}: {exc}"})
        res.seconds = round(time.perf_counter() - t0, 3)
        out.append(res)
    return out


def suite_json(results: list[CheckResult]) -> str:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (np.floating, float)):
            return float(x) if math.isfinite(x) else str(x)
        if isinstance(x, np.bool_):
            return bool(x)
        return x

    return json.dumps([clean(asdict(r)) for r in results], indent=2, sort_keys=True)

