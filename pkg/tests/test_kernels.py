import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fujitalab.kernels import (AlgebraicTail, Cauchy, CompactBump, Gaussian, InvalidWindowError,
                               KernelError, Laplace, Tabulated, algebraic_fujita_exponent,
                               estimate_expansion, fujita_exponent, kernel_from_config)

FAST_KERNELS = [Gaussian(), Laplace(), Cauchy(), AlgebraicTail(alpha=2.5), Gaussian(dim=2),
                Laplace(dim=2), AlgebraicTail(alpha=3.5, dim=2)]


@pytest.mark.parametrize("kernel", FAST_KERNELS, ids=lambda k: k.label)
@given(xi=st.floats(0.0, 50.0))
def test_transform_is_bounded_by_its_value_at_zero(kernel, xi):
    assert abs(kernel.hat(xi)) <= 1.0 + 1e-12
    assert kernel.hat(0.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kernel", FAST_KERNELS, ids=lambda k: k.label)
def test_closed_form_mass_matches_ball_mass_limit(kernel):
    assert kernel.ball_mass(1e4) == pytest.approx(1.0, abs=1e-3)
    assert kernel.ball_mass(0.0) == 0.0


def test_algebraic_transform_against_quadrature_oracle():
    assert AlgebraicTail(alpha=2.5).hat(0.7) == pytest.approx(
        oracles.FROZEN["algebraic_hat_alpha25_xi07"], rel=1e-8)


def test_compact_bump_quadrature_transform_is_even_and_normalised():
    k = CompactBump(radius=1.5)
    assert k.hat(0.0) == pytest.approx(1.0, abs=1e-10)
    assert k.hat(0.8) == pytest.approx(k.hat(-0.8), rel=1e-12)
    assert k(2.0) == 0.0


def test_tabulated_triangle_matches_its_fejer_transform():
    # triangle (1 - |x|)_+ has transform 2 (1 - cos xi) / xi^2
    k = Tabulated(radii=(0.0, 0.5, 1.0), values=(1.0, 0.5, 0.0))
    for xi in (0.3, 1.0, 4.0):
        assert k.hat(xi) == pytest.approx(2 * (1 - math.cos(xi)) / xi**2, rel=1e-9)


@pytest.mark.parametrize("kernel, beta, A", [
    (Gaussian(sigma=2.0), 2.0, 2.0),
    (Laplace(lam=1.0), 2.0, 1.0),
    (Cauchy(), 1.0, 1.0),
])
def test_expansion_recovers_leading_coefficients(kernel, beta, A):
    exp = estimate_expansion(kernel)
    assert exp.beta == pytest.approx(beta, abs=1e-3)
    assert exp.A == pytest.approx(A, rel=1e-2)
    assert not exp.low_confidence


def test_heavy_tail_gives_fractional_exponent_and_infinite_moment():
    exp = estimate_expansion(AlgebraicTail(alpha=2.5))
    assert exp.beta == pytest.approx(1.5, abs=0.02)
    assert not exp.finite_second_moment
    assert fujita_exponent(exp, 1) == pytest.approx(1.5, abs=0.02)


def test_tail_only_exponent_saturates_at_two_over_N():
    assert algebraic_fujita_exponent(2.5, 1) == pytest.approx(1.5)
    assert algebraic_fujita_exponent(5.0, 1) == 2.0
    with pytest.raises(KernelError):
        algebraic_fujita_exponent(1.0, 1)


def test_window_must_be_ordered():
    with pytest.raises(InvalidWindowError):
        estimate_expansion(Gaussian(), window=(1e-2, 1e-4))


@given(lam=st.floats(0.2, 5.0), xi=st.floats(0.0, 10.0))
def test_rescaling_dilates_the_transform(lam, xi):
    k = Laplace()
    assert k.rescaled(lam).hat(xi) == pytest.approx(k.hat(xi / lam), rel=1e-10)


def test_config_roundtrip_and_errors():
    k = AlgebraicTail(alpha=3.0, dim=2)
    assert kernel_from_config(k.to_config()) == k
    with pytest.raises(KernelError):
        kernel_from_config({"family": "nope"})
    with pytest.raises(KernelError):
        kernel_from_config({"family": "gaussian", "width": 1.0})
    with pytest.raises(KernelError):
        Gaussian(sigma=-1.0)
    with pytest.raises(KernelError):
        AlgebraicTail(alpha=0.5)


def test_tabulated_from_file(tmp_path):
    path = tmp_path / "tri.txt"
    np.savetxt(path, np.column_stack([[0.0, 0.5, 1.0], [1.0, 0.5, 0.0]]))
    k = kernel_from_config({"family": "tabulated", "path": "tri.txt"}, base_dir=tmp_path)
    assert k.ball_mass(1.0) == pytest.approx(1.0, abs=1e-8)
