"""The linear nonlocal flow d/dt v = J*v - v on a periodic grid.

Two independent routes are provided: the exact spectral propagator
exp(t (hat J_d - 1)) and the truncated exponential series
e^{-t} (u0 + sum_k t^k/k! J^{*k} * u0) built from repeated convolution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize, special, stats

from .grid import Field, Grid, boundary_mass, convolve, norms
from .kernels import Kernel

SERIES_TOLERANCE = 1e-12
G_A_TAIL = 1e-10


class AccuracyWarning(UserWarning):
    """A quadrature returned with an error estimate above the requested accuracy."""


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Grid-sampled kernel renormalised so that h^N sum J = 1 (times ``mass_scale``)."""

    kernel: Kernel
    grid: Grid
    field: Field
    raw_mass: float
    truncated_mass: float
    mass_scale: float = 1.0
    spectrum: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return self.grid.dim


@lru_cache(maxsize=64)
def discretize(kernel: Kernel, grid: Grid, mass_scale: float = 1.0) -> DiscreteKernel:
    """Sample ``kernel`` on ``grid`` and renormalise to unit discrete mass.

    ``mass_scale`` != 1 deliberately corrupts the normalisation (fault injection).
    """
    vals = np.asarray(kernel.radial(grid.radius()), dtype=float)
    raw_mass = float(grid.cell * vals.sum())
    vals = vals * (mass_scale / raw_mass)
    fld = Field(grid, vals)
    spec = grid.cell * np.fft.rfftn(np.fft.ifftshift(vals)).real
    truncated = max(0.0, 1.0 - kernel.ball_mass(grid.L))
    return DiscreteKernel(kernel, grid, fld, raw_mass, truncated, mass_scale, spec)


def _as_discrete(kernel: Kernel | DiscreteKernel, grid: Grid) -> DiscreteKernel:
    if isinstance(kernel, DiscreteKernel):
        if kernel.grid != grid:
            raise ValueError("discrete kernel and field live on different grids")
        return kernel
    return discretize(kernel, grid)


class LinearPropagator:
    """Applies exp(t (hat J_d - 1)) in Fourier space, caching symbols per t."""

    def __init__(self, dk: DiscreteKernel):
        self.dk = dk
        self.grid = dk.grid
        self._symbols: dict[float, np.ndarray] = {}

    def symbol(self, t: float) -> np.ndarray:
        s = self._symbols.get(t)
        if s is None:
            s = np.exp(t * (self.dk.spectrum - 1.0))
            if len(self._symbols) > 32:
                self._symbols.clear()
            self._symbols[t] = s
        return s

    def apply(self, values: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return values.copy()
        return np.fft.irfftn(np.fft.rfftn(values) * self.symbol(t), s=self.grid.shape,
                              axes=tuple(range(self.grid.dim)))


def evolve_linear(u0: Field, kernel: Kernel | DiscreteKernel, t: float) -> Field:
    """Exact-in-time solution of the linear flow at time ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    dk = _as_discrete(kernel, u0.grid)
    return Field(u0.grid, LinearPropagator(dk).apply(u0.values, t))


def truncation_tail(t: float, K: int) -> float:
    """e^{-t} sum_{k>K} t^k/k!, the Poisson upper tail."""
    if t == 0:
        return 0.0
    return float(stats.poisson.sf(K, t))


def choose_terms(t: float, tol: float = SERIES_TOLERANCE) -> int:
    """Smallest K >= 1 whose truncation tail is below ``tol``."""
    K = max(1, int(t))
    while truncation_tail(t, K) >= tol:
        K += 1
    return K


class SeriesResult(NamedTuple):
    field: Field
    bound: float
    terms: int


def series_K(
    u0: Field,
    kernel: Kernel | DiscreteKernel,
    t: float,
    terms: int | None = None,
    tol: float = SERIES_TOLERANCE,
) -> SeriesResult:
    """Truncated series e^{-t}(u0 + sum_{k<=K} t^k/k! J^{*k} * u0).

    ``bound`` is the certified sup-norm truncation error
    e^{-t} sum_{k>K} t^k/k! * ||u0||_inf.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    dk = _as_discrete(kernel, u0.grid)
    K = choose_terms(t, tol) if terms is None else int(terms)
    if K < 1:
        raise ValueError("need at least one series term")
    # Poisson weights e^{-t} t^k / k! stay finite for large t
    weights = stats.poisson.pmf(np.arange(K + 1), t)
    acc = weights[0] * u0.values
    term = u0
    for k in range(1, K + 1):
        term = convolve(dk.field, term)
        acc = acc + weights[k] * term.values
    out = Field(u0.grid, acc)
    bound = truncation_tail(t, K) * float(np.max(np.abs(u0.values)))
    return SeriesResult(out, bound, K)


def psi_field(
    kernel: Kernel | DiscreteKernel, grid: Grid, t: float, terms: int | None = None
) -> SeriesResult:
    """psi(t) = e^{-t} sum_{k>=1} t^k/k! J^{*k} sampled on ``grid``."""
    dk = _as_discrete(kernel, grid)
    K = choose_terms(t) if terms is None else int(terms)
    acc = np.zeros(grid.shape)
    if t > 0:
        weights = stats.poisson.pmf(np.arange(K + 1), t)
        term = dk.field
        acc += weights[1] * term.values
        for k in range(2, K + 1):
            term = convolve(dk.field, term)
            acc += weights[k] * term.values
    bound = truncation_tail(t, K) * float(np.max(dk.field.values))
    return SeriesResult(Field(grid, acc), bound, K)


DEFAULT_PSI_GRID = Grid(1, 40.0, 512)


def psi_mass(
    kernel: Kernel | DiscreteKernel,
    t: float,
    terms: int | None = None,
    grid: Grid | None = None,
) -> float:
    """h^N sum psi(t, .), which should equal 1 - e^{-t}."""
    if isinstance(kernel, DiscreteKernel):
        grid = kernel.grid
    elif grid is None:
        grid = Grid(kernel.dim, DEFAULT_PSI_GRID.L, DEFAULT_PSI_GRID.M if kernel.dim == 1 else 128)
    psi = psi_field(kernel, grid, t, terms).field
    return float(grid.cell * psi.values.sum())


# -- self-similar profile ----------------------------------------------------


def _G_A_cutoff(A: float, beta: float, N: int, tail: float = G_A_TAIL) -> float:
    """Xi with int_{|xi| > Xi} exp(-A |xi|^beta) d xi <= tail."""

    def tail_mass(X):
        s = N / beta
        area = 2.0 if N == 1 else 2 * math.pi
        return area * special.gammaincc(s, A * X**beta) * math.gamma(s) / (beta * A**s)

    hi = 1.0
    while tail_mass(hi) > tail:
        hi *= 2.0
    return optimize.brentq(lambda X: tail_mass(X) - tail, 0.0, hi) if tail_mass(0.0) > tail else 0.0


def profile_G_A(A: float, beta: float, y, N: int) -> float:
    """G_A(y) = (2 pi)^{-N} int exp(i y.xi) exp(-A |xi|^beta) d xi by radial quadrature."""
    if A <= 0 or not 0 < beta <= 2:
        raise ValueError("need A > 0 and 0 < beta <= 2")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(y, dtype=float))))
    X = _G_A_cutoff(A, beta, N)
    weight = lambda s: math.exp(-A * s**beta)  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if N == 1:
            if r == 0.0:
                val, err = integrate.quad(weight, 0.0, X, epsabs=1e-14, epsrel=1e-12, limit=400)
            else:
                val, err = integrate.quad(weight, 0.0, X, weight="cos", wvar=r,
                                          epsabs=1e-14, epsrel=1e-12, limit=400)
            out, err = val / math.pi, err / math.pi
        elif N == 2:
            pts = [0.0]
            if r > 0:
                zeros = special.jn_zeros(0, int(r * X / math.pi) + 2) / r
                pts += [z for z in zeros if z < X]
            pts.append(X)
            val = err = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                v, e = integrate.quad(lambda s: weight(s) * special.j0(r * s) * s, a, b,
                                      epsabs=1e-14, epsrel=1e-12, limit=200)
                val += v
                err += e
            out, err = val / (2 * math.pi), err / (2 * math.pi)
        else:
            raise ValueError("profile_G_A supports N = 1, 2")
    if err > 1e-8:
        warnings.warn(f"G_A quadrature error estimate {err:.1e} at |y|={r:g}", AccuracyWarning)
    return float(out)


# -- decay rate ---------------------------------------------------------------


class DecayFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    times: np.ndarray
    linf: np.ndarray
    contaminated: bool


def decay_fit(
    kernel: Kernel | DiscreteKernel,
    u0: Field,
    t_window: tuple[float, float] = (50.0, 500.0),
    samples: int = 12,
    contamination: float = 1e-4,
) -> DecayFit:
    """Regress log ||v(t)||_inf on log t for the linear flow started at ``u0``."""
    t1, t2 = t_window
    if t1 < 1 or t2 <= t1:
        raise ValueError("need 1 <= t1 < t2")
    if samples < 5:
        raise ValueError("need at least 5 samples")
    dk = _as_discrete(kernel, u0.grid)
    prop = LinearPropagator(dk)
    times = np.geomspace(t1, t2, samples)
    linf = np.empty(samples)
    contaminated = False
    for i, t in enumerate(times):
        v = Field(u0.grid, prop.apply(u0.values, float(t)))
        n = norms(v)
        linf[i] = n.Linf
        if boundary_mass(v) > contamination * n.L1:
            contaminated = True
    res = stats.linregress(np.log(times), np.log(linf))
    return DecayFit(float(res.slope), float(res.intercept), float(res.rvalue**2),
                    times, linf, contaminated)
