import pytest

import oracles


@pytest.mark.parametrize(
    "key, value",
    [
        ("gaussian_threshold_R2_p3", lambda: oracles.gaussian_threshold(2.0, 3.0)),
        ("lower_bound_G_A05_beta2", lambda: oracles.lower_bound_G(0.5, 2.0)),
        ("kaplan_gaussian_t1", lambda: oracles.kaplan_gaussian(1.0)),
        ("kaplan_gaussian_t5", lambda: oracles.kaplan_gaussian(5.0)),
        ("kaplan_gaussian_t10", lambda: oracles.kaplan_gaussian(10.0)),
        ("bernoulli_t_star_a1_b1_p1_x2", lambda: oracles.bernoulli_blowup_time(2.0, 1.0, 1.0, 1.0)),
        ("algebraic_hat_alpha25_xi07", lambda: oracles.algebraic_hat(0.7)),
        ("ball_constant_3", oracles.ball_constant_3d),
    ],
)
def test_frozen_value_matches_its_oracle(key, value):
    assert value() == pytest.approx(oracles.FROZEN[key], rel=1e-12)
