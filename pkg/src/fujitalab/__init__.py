"""Numerical laboratory for the Fujita exponent of nonlocal reaction-dispersion equations.

Modules: ``kernels`` (dispersal kernels and their Fourier expansion),
``grid`` (periodic grids and fields), ``semigroup`` (the linear flow),
``solver`` (nonlinear runs and outcome classification), ``diagnostics``
(analytic bounds and constants) and ``cli`` (batch front-end).
"""

__version__ = "0.1.0"
