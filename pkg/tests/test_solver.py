import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fujitalab.grid import Field, Grid, radial_field
from fujitalab.kernels import Gaussian, Laplace
from fujitalab.solver import (AlleeLogistic, Bernoulli, BlowupSignal, Blowup, ConvergeToOne, Custom,
                              GlobalDecay, PureGrowth, SolverConfig, comparison_check,
                              extrapolate_blowup_time, fixed_step_config, outcome_to_dict,
                              reaction_from_config, run, step)

G = Grid(1, 20.0, 64)


def constant(level, grid=G):
    return Field(grid, np.full(grid.shape, level))


@given(x0=st.floats(0.0, 3.0), p=st.floats(0.2, 4.0), b=st.floats(0.0, 2.0),
       dt=st.floats(1e-3, 0.05))
def test_bernoulli_substep_matches_the_closed_form(x0, p, b, dt):
    r = Bernoulli(p, 1.0, b)
    x = np.array([x0])
    try:
        got = r.substep(x, dt)[0]
    except BlowupSignal:
        assert dt >= oracles.bernoulli_blowup_time(x0, 1.0, b, p) * (1 - 1e-9)
        return
    if b > 0:
        c = -math.expm1(-p * b * dt) / b
    else:
        c = p * dt
    exact = x0 * math.exp(-b * dt) * (1 - c * x0**p) ** (-1 / p)
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-300)


def test_constant_data_follow_the_reaction_ode_exactly():
    # the linear part annihilates constants, so a Bernoulli run is exact to rounding
    r = Bernoulli(1.0, 1.0, 1.0)
    u = constant(0.5)
    for _ in range(100):
        u = step(u, Gaussian(), r, 0.01)
    exact = 1.0 / (1.0 + math.e)  # x0 = 1/2, a = b = 1, p = 1 at t = 1
    assert np.max(np.abs(u.values - exact)) <= 1e-12


def test_pure_growth_is_bernoulli_without_loss():
    x = np.linspace(0.0, 1.0, 11)
    assert np.array_equal(PureGrowth(2.0).substep(x, 0.1), Bernoulli(2.0, 1.0, 0.0).substep(x, 0.1))
    assert "PureGrowth" in repr(PureGrowth(2.0))


@pytest.mark.parametrize("bad", [dict(p=0.0), dict(p=1.0, a=0.0), dict(p=1.0, b=-1.0)])
def test_bernoulli_validation(bad):
    with pytest.raises(ValueError):
        Bernoulli(**bad)


def test_allee_equilibria_are_fixed():
    for level in (0.0, 1.0):
        u = constant(level)
        for _ in range(10):
            u = step(u, Laplace(), AlleeLogistic(1.0), 0.1)
        assert np.allclose(u.values, level, atol=1e-14)


@given(amp=st.floats(0.0, 1.0), width=st.floats(0.3, 5.0), p=st.floats(0.2, 3.0))
def test_allee_flow_stays_in_the_unit_interval(amp, width, p):
    u = radial_field(lambda r: amp * np.exp(-0.5 * (r / width) ** 2), G)
    for _ in range(20):
        u = step(u, Gaussian(), AlleeLogistic(p), 0.2)
        assert u.values.min() >= -1e-14 and u.values.max() <= 1.0 + 1e-12


@given(lo=st.floats(0.0, 0.5), extra=st.floats(0.0, 0.5), p=st.floats(1.0, 3.0))
def test_comparison_principle(lo, extra, p):
    low = radial_field(lambda r: lo * np.exp(-r**2), G)
    high = radial_field(lambda r: (lo + extra) * np.exp(-r**2 / 2), G)
    rep = comparison_check(low, high, Gaussian(), PureGrowth(p), SolverConfig(dt_init=0.05, t_max=5.0))
    assert rep.ordered


def test_custom_reaction_sandwich_is_enforced():
    ok = Custom(lambda s: 2 * s**2 * (1 - s), p=1.0, m=1.0, M=3.0)
    assert ok.to_config()["type"] == "custom"
    with pytest.raises(ValueError):
        Custom(lambda s: s**2, p=1.0, m=1.0, M=3.0)


def test_reaction_config_parsing():
    assert reaction_from_config({"type": "bernoulli", "p": 1, "a": 2, "b": 0.5}) == Bernoulli(1.0, 2.0, 0.5)
    assert isinstance(reaction_from_config({"type": "allee_logistic", "p": 0.5}), AlleeLogistic)
    for bad in ({"type": "pure_growth"}, {"type": "x", "p": 1}, {"p": 1, "q": 2}):
        with pytest.raises(ValueError):
            reaction_from_config(bad)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt_min=1.0, dt_init=0.5)
    with pytest.raises(ValueError):
        SolverConfig(U_max=1.0)
    cfg = fixed_step_config(SolverConfig(), 0.01)
    assert not cfg.adaptive and cfg.dt_init == cfg.dt_max == 0.01


def test_zero_datum_decays_trivially_and_negative_data_are_rejected():
    assert isinstance(run(constant(0.0), Gaussian(), PureGrowth(1.0)).outcome, GlobalDecay)
    with pytest.raises(ValueError):
        run(constant(-1.0), Gaussian(), PureGrowth(1.0))


def test_large_constant_blows_up_near_the_ode_time():
    res = run(constant(1.0), Gaussian(), PureGrowth(1.0), SolverConfig(t_max=5.0))
    assert isinstance(res.outcome, Blowup)
    assert res.outcome.t_star == pytest.approx(1.0, rel=1e-2)
    assert outcome_to_dict(res.outcome)["kind"] == "blowup"


def test_blowup_extrapolation_on_exact_profile():
    t = 1.0 - np.geomspace(1.0, 1e-6, 2000)
    linf = 1.0 / (1.0 - t)  # p = 1, t* = 1
    assert extrapolate_blowup_time(t, linf, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_allee_invasion_from_large_data():
    g = Grid(1, 100.0, 512)
    u0 = radial_field(lambda r: 0.9 * np.exp(-0.5 * (r / 10.0) ** 2), g)
    res = run(u0, Gaussian(), AlleeLogistic(0.5), SolverConfig(t_max=500.0, hair_R=3.0))
    assert isinstance(res.outcome, ConvergeToOne)
    assert len(res.snapshots) >= 2 and res.history.t[-1] == pytest.approx(res.outcome.t_hit)
