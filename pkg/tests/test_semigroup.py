import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fujitalab.grid import Grid, norms, radial_field, total_mass
from fujitalab.kernels import Cauchy, Gaussian, Laplace
from fujitalab.semigroup import (LinearPropagator, choose_terms, discretize, evolve_linear,
                                 profile_G_A, psi_field, psi_mass, series_K, truncation_tail)

G = Grid(1, 20.0, 256)


def bump(grid, amplitude=1.0, width=1.0):
    return radial_field(lambda r: amplitude * np.exp(-0.5 * (r / width) ** 2), grid)


def test_discrete_kernel_has_unit_mass():
    for k, g in ((Gaussian(), G), (Laplace(dim=2), Grid(2, 20.0, 64))):
        dk = discretize(k, g)
        assert total_mass(dk.field) == pytest.approx(1.0, abs=1e-13)
    assert total_mass(discretize(Gaussian(), G, 1.01).field) == pytest.approx(1.01)


@given(t=st.floats(0.0, 200.0))
def test_linear_flow_conserves_mass_and_positivity(t):
    u0 = bump(G)
    v = evolve_linear(u0, Laplace(), t)
    assert total_mass(v) == pytest.approx(total_mass(u0), rel=1e-12)
    assert v.values.min() >= -1e-14 * u0.values.max()
    assert norms(v).Linf <= norms(u0).Linf * (1 + 1e-12)


@given(s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
def test_propagator_is_a_semigroup(s, t):
    prop = LinearPropagator(discretize(Gaussian(), G))
    u0 = bump(G).values
    assert np.allclose(prop.apply(prop.apply(u0, s), t), prop.apply(u0, s + t), atol=1e-13)


@given(t=st.floats(0.0, 5.0))
def test_spectral_flow_matches_series_oracle(t):
    u0 = bump(G)
    s = series_K(u0, Gaussian(), t, tol=1e-12)
    err = np.max(np.abs(evolve_linear(u0, Gaussian(), t).values - s.field.values))
    assert err <= 1e-10 + s.bound


def test_truncation_bound_is_certified():
    for t in (0.5, 5.0, 40.0):
        K = choose_terms(t, 1e-10)
        assert truncation_tail(t, K) <= 1e-10 < truncation_tail(t, K - 1)


@given(t=st.floats(0.01, 8.0))
def test_psi_mass_identity(t):
    assert psi_mass(Gaussian(), t) == pytest.approx(-math.expm1(-t), abs=1e-10)


def test_psi_is_nonnegative_and_finite_at_large_time():
    psi = psi_field(Gaussian(), Grid(1, 200.0, 1024), 1000.0).field
    assert np.all(np.isfinite(psi.values)) and psi.values.min() >= -1e-15


@given(A=st.floats(0.2, 3.0), y=st.floats(0.0, 6.0))
def test_G_A_closed_forms_in_one_dimension(A, y):
    assert profile_G_A(A, 2.0, y, 1) == pytest.approx(
        math.exp(-y * y / (4 * A)) / math.sqrt(4 * math.pi * A), abs=1e-9)
    assert profile_G_A(A, 1.0, y, 1) == pytest.approx(A / (math.pi * (A * A + y * y)), abs=1e-9)


def test_G_A_two_dimensional_heat_kernel():
    for y in (0.0, 0.7, 2.0):
        assert profile_G_A(0.5, 2.0, (y, 0.0), 2) == pytest.approx(
            math.exp(-y * y / 2) / (2 * math.pi), abs=1e-9)


def test_G_A_rejects_bad_parameters():
    with pytest.raises(ValueError):
        profile_G_A(1.0, 2.5, 0.0, 1)


def test_gaussian_flow_approaches_heat_profile():
    g = Grid(1, 400.0, 4096)
    u0 = bump(g)
    mass = total_mass(u0)
    for t in (100.0, 200.0, 400.0):
        peak = norms(evolve_linear(u0, Gaussian(), t)).Linf
        assert peak * math.sqrt(t) == pytest.approx(mass * profile_G_A(0.5, 2.0, 0.0, 1), rel=0.1)


@pytest.mark.slow
def test_cauchy_flow_approaches_rescaled_poisson_profile():
    g = Grid(1, 8192.0, 32768)
    u0 = bump(g)
    t = 200.0
    v = evolve_linear(u0, Cauchy(), t)
    mass = total_mass(u0)
    for y in (0.0, 0.5, 1.0):
        i = int(np.argmin(np.abs(g.axis - y * t)))
        expected = mass * profile_G_A(1.0, 1.0, g.axis[i] / t, 1) / t
        assert v.values[i] == pytest.approx(expected, rel=0.1)
