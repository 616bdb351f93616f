"""Periodic uniform grids on [-L, L]^N, sampled fields, FFT convolution and norms."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

MAX_POINTS = 2**24
IMAG_TOLERANCE = 1e-12
BOUNDARY_CELLS = 5


class GridError(ValueError):
    pass


class NumericalIntegrityError(RuntimeError):
    """FFT round trip produced a non-negligible imaginary part."""


def _is_fft_friendly(M: int) -> bool:
    if M < 2 or M % 2:
        return False
    for q in (2, 3, 5):
        while M % q == 0:
            M //= q
    return M == 1


@dataclass(frozen=True)
class Grid:
    """Nodes x_k = -L + k h, k = 0..M-1 on each axis, h = 2L/M, periodic."""

    dim: int
    L: float
    M: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError("grid dimension must be 1 or 2")
        if not self.L > 0:
            raise GridError("half-width L must be positive")
        if not _is_fft_friendly(self.M):
            raise GridError(f"M={self.M} must be an even 2^a 3^b 5^c composite")
        if self.M**self.dim > MAX_POINTS:
            raise GridError(f"M^N = {self.M ** self.dim} exceeds the memory cap {MAX_POINTS}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def cell(self) -> float:
        """Cell volume h^N."""
        return self.h**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (N,)``."""
        axes = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def radius(self) -> np.ndarray:
        """|x| at each node."""
        if self.dim == 1:
            return np.abs(self.axis)
        x = self.axis
        return np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)

    @property
    def origin_index(self) -> tuple[int, ...]:
        return (self.M // 2,) * self.dim

    def frequencies(self) -> np.ndarray:
        """Angular frequencies of the full FFT along one axis."""
        return 2 * np.pi * np.fft.fftfreq(self.M, d=self.h)

    def freq_norm(self, real: bool = False) -> np.ndarray:
        """|xi| on the (r)fft lattice."""
        k = self.frequencies()
        if self.dim == 1:
            return np.abs(k[: self.M // 2 + 1]) if real else np.abs(k)
        k_last = np.abs(k[: self.M // 2 + 1]) if real else k
        return np.sqrt(k[:, None] ** 2 + k_last[None, :] ** 2)

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.L, self.M * factor)


@dataclass
class Field:
    """Real samples on a grid; ``values`` has shape ``grid.shape`` (row-major)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def at_origin(self) -> float:
        return float(self.values[self.grid.origin_index])


def sample(f: Callable[[np.ndarray], np.ndarray], grid: Grid) -> Field:
    """Evaluate ``f`` at the nodes; ``f`` receives points of shape (..., N)."""
    pts = grid.coords()
    vals = np.asarray(f(pts[..., 0] if grid.dim == 1 else pts), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        raise GridError("sampled function is not finite on the grid")
    return Field(grid, vals)


def radial_field(profile: Callable[[np.ndarray], np.ndarray], grid: Grid) -> Field:
    vals = np.asarray(profile(grid.radius()), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise GridError("sampled profile is not finite on the grid")
    return Field(grid, np.broadcast_to(vals, grid.shape).copy())


def indicator(grid: Grid, R: float, level: float = 1.0) -> Field:
    return Field(grid, np.where(grid.radius() <= R, level, 0.0))


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def convolve(a: Field, b: Field) -> Field:
    """Periodic convolution (a * b)(x_i) = h^N sum_j a(x_i - x_j) b(x_j)."""
    _check_same_grid(a, b)
    g = a.grid
    prod = np.fft.fftn(a.values) * np.fft.fftn(b.values)
    raw = np.fft.ifftn(prod)
    scale = np.max(np.abs(raw.real)) if raw.size else 0.0
    if np.max(np.abs(raw.imag)) > IMAG_TOLERANCE * max(scale, 1.0):
        raise NumericalIntegrityError("imaginary residue above tolerance in convolution")
    # product of two centred arrays is centred at index M (== 0 mod M); shift back to M/2
    out = np.fft.fftshift(raw.real) * g.cell
    return Field(g, out)


class Norms(NamedTuple):
    L1: float
    Linf: float


def norms(u: Field) -> Norms:
    v = np.abs(u.values)
    return Norms(L1=float(u.grid.cell * v.sum()), Linf=float(v.max()))


def total_mass(u: Field) -> float:
    return float(u.grid.cell * u.values.sum())


def localized_mass(u: Field, R: float) -> float:
    """h^N sum over nodes with |x_k| <= R."""
    g = u.grid
    if R >= g.L:
        raise GridError(f"localized mass radius R={R} must be < L={g.L}")
    return float(g.cell * u.values[g.radius() <= R].sum())


def boundary_mask(grid: Grid, cells: int = BOUNDARY_CELLS) -> np.ndarray:
    idx = np.arange(grid.M)
    edge = (idx < cells) | (idx >= grid.M - cells)
    if grid.dim == 1:
        return edge
    return edge[:, None] | edge[None, :]


def boundary_mass(u: Field, cells: int = BOUNDARY_CELLS) -> float:
    """Mass of |u| in the cells within ``cells`` spacings of the box boundary."""
    return float(u.grid.cell * np.abs(u.values[boundary_mask(u.grid, cells)]).sum())


# -- persistence ------------------------------------------------------------

_MAGIC = b"FKPF"
_HEADER = struct.Struct("<4siqdd")  # magic, dim, M, L, time


def save_field(path: str | Path, u: Field, time: float = 0.0) -> None:
    """Flat binary snapshot: header (dim, M, L, time) then little-endian float64 payload."""
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.dim, g.M, g.L, float(time)))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def load_field(path: str | Path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, dim, M, L, time = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise GridError(f"{path}: not a field snapshot")
        data = np.frombuffer(fh.read(), dtype="<f8")
    g = Grid(dim, L, M)
    return Field(g, data.reshape(g.shape).astype(float)), time


def save_field_csv(path: str | Path, u: Field) -> None:
    g = u.grid
    if g.M**g.dim > 200_000:
        raise GridError("CSV export is meant for small grids")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if g.dim == 1:
            w.writerow(["x", "u"])
            for x, v in zip(g.axis, u.values):
                w.writerow([repr(float(x)), repr(float(v))])
        else:
            w.writerow(["x", "y", "u"])
            for i, x in enumerate(g.axis):
                for j, y in enumerate(g.axis):
                    w.writerow([repr(float(x)), repr(float(y)), repr(float(u.values[i, j]))])
