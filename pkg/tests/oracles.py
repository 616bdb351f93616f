"""Independent reference values for the test-suite.

Each oracle is written with mpmath or closed forms only, never with the
package under test.  ``FROZEN`` holds the values the oracles produced when
the suite was written; ``test_oracles.py`` recomputes them so that a
change in either place is noticed.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 30


def gaussian_threshold(R: float, p: float, sigma: float = 1.0) -> float:
    """(1 - C_1 int_{|z|<=R} J)^{1/p} for the 1D Gaussian kernel, C_1 = 1/2."""
    mass = mp.erf(R / (sigma * mp.sqrt(2)))
    return float((1 - mass / 2) ** (mp.mpf(1) / p))


def lower_bound_G(A: float, beta: float) -> float:
    """(1/2) int_R exp(-2 A |z|^beta) dz."""
    return float(mp.quad(lambda z: mp.exp(-2 * A * abs(z) ** beta), [0, mp.inf]))


def kaplan_gaussian(t: float) -> float:
    """int exp(t (e^{-xi^2/2} - 1)) hat u0 d xi, Gaussian kernel, u0 = exp(-x^2/2)."""
    integrand = lambda x: mp.exp(t * (mp.exp(-x * x / 2) - 1)) * mp.sqrt(2 * mp.pi) * mp.exp(-x * x / 2)
    return float(mp.quad(integrand, [-mp.inf, 0, mp.inf]))


def bernoulli_blowup_time(x0: float, a: float, b: float, p: float) -> float:
    """t* for x' = a x^{1+p} - b x, x0 > (b/a)^{1/p}."""
    if b == 0:
        return float(1 / (a * p * mp.mpf(x0) ** p))
    ratio = mp.mpf(a) / b
    return float(mp.log(ratio / (ratio - mp.mpf(x0) ** (-p))) / (p * b))


def algebraic_hat(xi: float, alpha: float = 2.5, r0: float = 1.0) -> float:
    """1D transform of c (r0^2 + x^2)^{-alpha/2} by oscillatory quadrature."""
    prof = lambda x: (r0 * r0 + x * x) ** (-mp.mpf(alpha) / 2)
    c = 1 / (2 * mp.quad(prof, [0, mp.inf]))
    return float(2 * c * mp.quadosc(lambda x: mp.cos(xi * x) * prof(x), [0, mp.inf], omega=xi))


def ball_constant_3d() -> float:
    """theta* = pi/4; (int_{-pi/4}^{pi/4} cos / int_{-pi/2}^{pi/2} cos) * ((pi/2) / (2 pi))."""
    return float(mp.sin(mp.pi / 4) * (mp.pi / 2) / (2 * mp.pi))


FROZEN = {
    "gaussian_threshold_R2_p3": 0.805560291470090085954397570912,
    "lower_bound_G_A05_beta2": 0.886226925452758013649083741671,
    "kaplan_gaussian_t1": 4.85811273818148448084633950339,
    "kaplan_gaussian_t5": 2.72835284470433313974463500975,
    "kaplan_gaussian_t10": 1.96078669358937744167251023915,
    "bernoulli_t_star_a1_b1_p1_x2": 0.693147180559945309417232121458,
    "algebraic_hat_alpha25_xi07": 0.6391413929865545485419289,
    "ball_constant_3": 0.1767766952966368811002111,
}
