"""Acceptance criteria, one test per criterion.

Every test records a one-line verdict that is printed in the pytest
terminal summary; running this file directly prints the same table.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

import acceptance_registry
import oracles
from fujitalab.diagnostics import (ball_constant_C_N, ball_shift_check, blowup_threshold,
                                   fit_lower_profile, hairtrigger_Phi0, hairtrigger_T, kaplan_f,
                                   kaplan_f_dual, kaplan_lower_bound, kaplan_upper_bound,
                                   subsolution_residual)
from fujitalab.grid import Grid, indicator, norms, radial_field
from fujitalab.kernels import AlgebraicTail, Cauchy, Gaussian, estimate_expansion
from fujitalab.semigroup import decay_fit, evolve_linear, profile_G_A, psi_mass, series_K
from fujitalab.solver import (AlleeLogistic, Bernoulli, Blowup, ConvergeToOne, GlobalDecay,
                              PureGrowth, SolverConfig, fixed_step_config, mass_ode_residual, run)


def bump(grid, amplitude=1.0, width=1.0):
    return radial_field(lambda r: amplitude * np.exp(-0.5 * (r / width) ** 2), grid)


def verdict(number, title, passed, detail):
    acceptance_registry.record(number, title, bool(passed), detail)
    assert passed, detail


def test_criterion_01_oracle_equivalence():
    g = Grid(1, 20.0, 256)
    u0 = bump(g)
    s = series_K(u0, Gaussian(), 1.0, tol=1e-11)
    err = float(np.max(np.abs(evolve_linear(u0, Gaussian(), 1.0).values - s.field.values)))
    verdict(1, "oracle equivalence", s.bound < 1e-10 and err <= 1e-8,
            f"sup error {err:.1e} (<= 1e-8), truncation bound {s.bound:.1e} (< 1e-10), K={s.terms}")


def test_criterion_02_psi_mass():
    errs = [abs(psi_mass(Gaussian(), t) - (1 - math.exp(-t))) for t in (0.5, 1.0, 5.0)]
    verdict(2, "psi mass identity", max(errs) <= 1e-6,
            "errors at t=0.5,1,5: " + ", ".join(f"{e:.1e}" for e in errs) + " (<= 1e-6)")


@pytest.mark.slow
def test_criterion_03_linear_decay_rates():
    cases = [
        ("Gaussian", Gaussian(), Grid(1, 400.0, 4096), -0.5, 0.05),
        ("Cauchy", Cauchy(), Grid(1, 16384.0, 65536), -1.0, 0.10),
        ("AlgebraicTail a=2.5", AlgebraicTail(alpha=2.5), Grid(1, 4096.0, 32768), -2 / 3, 0.07),
    ]
    ok, parts = True, []
    for name, k, g, target, tol in cases:
        fit = decay_fit(k, bump(g), (50.0, 500.0), samples=12)
        good = abs(fit.slope - target) <= tol and not fit.contaminated
        ok &= good
        parts.append(f"{name} {fit.slope:.3f} ({target:.3f}+-{tol})")
    verdict(3, "linear decay rates", ok, "; ".join(parts))


def test_criterion_04_kaplan_duality():
    g = Grid(1, 20.0, 256)
    u0 = bump(g)
    gaps, oracle_err = [], []
    for t in (1.0, 5.0, 10.0):
        f = kaplan_f(Gaussian(), u0, t)
        gaps.append(abs(f - kaplan_f_dual(Gaussian(), u0, t)) / f)
        oracle_err.append(abs(f - oracles.FROZEN[f"kaplan_gaussian_t{int(t)}"]))
    verdict(4, "Kaplan duality", max(gaps) <= 1e-4 and max(oracle_err) <= 1e-6,
            f"max relative gap {max(gaps):.1e} (<= 1e-4); vs quadrature oracle {max(oracle_err):.1e}")


def test_criterion_05_kaplan_bounds():
    exp = estimate_expansion(Gaussian())
    g = Grid(1, 400.0, 4096)
    u0 = bump(g)
    t = np.geomspace(1.0, 1e4, 300)
    gap = kaplan_lower_bound(exp, norms(u0).L1, t) - kaplan_upper_bound(1.0, u0.at_origin(), t)
    crossed = np.nonzero(gap > 0)[0]
    t_cross = float(t[crossed[0]]) if crossed.size else math.nan

    small = bump(g, 0.1)
    res = run(small, Gaussian(), PureGrowth(3.0), SolverConfig(t_max=200.0))
    ts = np.geomspace(1.0, 200.0, 12)
    f = np.array([kaplan_f(Gaussian(), small, float(s)) for s in ts])
    upper = kaplan_upper_bound(3.0, small.at_origin(), ts)
    below = bool(np.all(f <= upper))
    verdict(5, "Kaplan bound mechanics",
            crossed.size > 0 and isinstance(res.outcome, GlobalDecay) and below,
            f"p=1 lower>upper from t={t_cross:.3g}; p=3 run {res.outcome.kind}, "
            f"max f/upper {float(np.max(f / upper)):.3f}")


def _classify(u0_fn, grids, kernel, reaction, cfg):
    return [run(u0_fn(g), kernel, reaction, cfg).outcome for g in grids]


@pytest.mark.slow
def test_criterion_06_fujita_dichotomy():
    k = Gaussian()
    a = _classify(lambda g: bump(g, 1e-3, 10.0), [Grid(1, 1000.0, 4096), Grid(1, 1000.0, 8192)],
                  k, PureGrowth(1.0), SolverConfig(t_max=20000.0, dt_max=5.0))
    b = _classify(lambda g: bump(g, 0.1), [Grid(1, 400.0, 2048), Grid(1, 400.0, 4096)],
                  k, PureGrowth(3.0), SolverConfig(t_max=200.0))
    lam_min = blowup_threshold(k, 2.0, 3.0)
    lam = 0.9
    c = _classify(lambda g: indicator(g, 2.0, lam), [Grid(1, 100.0, 1024), Grid(1, 100.0, 2048)],
                  k, PureGrowth(3.0), SolverConfig(t_max=100.0))
    ok_a = all(isinstance(o, Blowup) for o in a)
    ok_b = all(isinstance(o, GlobalDecay) and abs(o.slope + 0.5) <= 0.1 for o in b)
    ok_c = lam > lam_min and all(isinstance(o, Blowup) for o in c)
    detail = (f"(a) {[o.kind for o in a]} t*={a[0].t_star:.1f}; "
              f"(b) {[o.kind for o in b]} slopes {[round(o.slope, 3) for o in b if o.slope]}; "
              f"(c) lambda={lam} > {lam_min:.4f}: {[o.kind for o in c]}")
    verdict(6, "Fujita dichotomy, M -> 2M", ok_a and ok_b and ok_c, detail)


def test_criterion_07_constants():
    c1, c2 = ball_constant_C_N(1), ball_constant_C_N(2)
    mc1 = ball_shift_check(Gaussian(dim=1), 1000, seed=1)
    mc2 = ball_shift_check(Gaussian(dim=2), 1000, seed=2)
    verdict(7, "ball constants", c1 == 0.5 and abs(c2 - 1 / 3) <= 1e-10 and mc1.holds and mc2.holds,
            f"C1={c1}, |C2-1/3|={abs(c2 - 1 / 3):.1e}, Monte Carlo worst ratio "
            f"N=1 {mc1.worst_ratio:.3f}, N=2 {mc2.worst_ratio:.3f}")


def test_criterion_08_bernoulli_blowup_time():
    g = Grid(1, 10.0, 32)
    u0 = radial_field(lambda r: np.full_like(r, 2.0), g)
    res = run(u0, Gaussian(), Bernoulli(1.0, 1.0, 1.0), SolverConfig(dt_init=0.01, t_max=5.0))
    exact = oracles.FROZEN["bernoulli_t_star_a1_b1_p1_x2"]
    rel = abs(res.outcome.t_star - exact) / exact if isinstance(res.outcome, Blowup) else math.inf
    verdict(8, "Bernoulli blow-up time", rel <= 0.01,
            f"t*={getattr(res.outcome, 't_star', float('nan')):.6f} vs ln 2, relative error {rel:.1e}")


def test_criterion_09_G_A_closed_forms():
    ys = np.linspace(0.0, 5.0, 26)
    err_gauss = max(abs(profile_G_A(A, 2.0, y, 1) - math.exp(-y * y / (4 * A)) / math.sqrt(4 * math.pi * A))
                    for A in (0.5, 1.3) for y in ys)
    err_poisson = max(abs(profile_G_A(A, 1.0, y, 1) - A / (math.pi * (A * A + y * y)))
                      for A in (0.5, 1.3) for y in ys)
    verdict(9, "G_A closed forms", max(err_gauss, err_poisson) <= 1e-6,
            f"beta=2 error {err_gauss:.1e}, beta=1 error {err_poisson:.1e} (<= 1e-6)")


def test_criterion_10_hair_trigger():
    g = Grid(1, 400.0, 2048)
    cfg = SolverConfig(t_max=5000.0, hair_R=5.0, hair_eps=0.01)
    invade = run(bump(g, 0.5), Gaussian(), AlleeLogistic(0.4), cfg)
    inner = float(np.min(invade.final.values[g.radius() <= 5.0]))
    extinct = run(bump(g, 0.1), Gaussian(), AlleeLogistic(5.0), SolverConfig(t_max=200.0))
    ok = isinstance(invade.outcome, ConvergeToOne) and inner >= 0.99 and isinstance(extinct.outcome, GlobalDecay)
    verdict(10, "hair trigger", ok,
            f"p=0.4: {invade.outcome.kind} at t={getattr(invade.outcome, 't_hit', float('nan')):.1f}, "
            f"inf_(|x|<=5) u={inner:.4f}; p=5 small data: {extinct.outcome.kind}")


def test_criterion_11_mass_ode():
    g = Grid(1, 40.0, 512)
    u0 = bump(g, 0.5)
    res = []
    for dt in (0.01, 0.005):
        r = run(u0, Gaussian(), PureGrowth(1.0), fixed_step_config(SolverConfig(t_max=2.0), dt))
        res.append(mass_ode_residual(r.history))
    ratio = res[0] / res[1]
    verdict(11, "mass ODE", res[0] <= 5e-3 and ratio >= 3.0,
            f"residual {res[0]:.1e} at dt=0.01, {res[1]:.1e} at dt=0.005, ratio {ratio:.2f} (>= 3)")


def test_criterion_12_subsolution():
    k = Gaussian()
    exp = estimate_expansion(k)
    g = Grid(1, 300.0, 4096)
    prof = fit_lower_profile(k, 1.0, g, exp)
    eps, p, tau = 0.1, 0.4, 100.0
    Phi0 = hairtrigger_Phi0(g, eps, prof, tau, exp.beta)
    T = hairtrigger_T(tau, eps, p, prof.gamma, 1, exp.beta)
    ts = np.linspace(0.1 * T, 0.9 * T, 9)
    coarse = subsolution_residual(k, eps, p, Phi0, ts, dt_fd=0.02)
    fine = subsolution_residual(k, eps, p, Phi0, ts, dt_fd=0.01)
    ratio = coarse.max_fd_error / fine.max_fd_error
    ok = max(coarse.max_residual, fine.max_residual) <= 1e-3 and ratio >= 2.0 and fine.below_one_minus_eps
    verdict(12, "subsolution residual", ok,
            f"max residual/Linf(W) {coarse.max_residual:.1e}; FD error {coarse.max_fd_error:.1e} -> "
            f"{fine.max_fd_error:.1e} (ratio {ratio:.1f}); T(100)={T:.1f}, gamma={prof.gamma:.3f} (empirical)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
