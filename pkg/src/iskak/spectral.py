"""Periodic 1-D pseudo-spectral toolbox.

Grid functions live on the uniform nodes of [0, L); derivatives, Fourier
multipliers and norms act through the FFT of the trigonometric interpolant.
Quadratic nonlinearities use the 2/3-rule dealiased product; higher powers
are chained pairwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "PeriodicGrid",
    "RealField",
    "Multiplier",
    "deriv",
    "apply_multiplier",
    "dealiased_product",
    "integrate",
    "l2_norm",
    "hs_norm",
    "field_from_function",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on [0, length) with n_points nodes (even, >= 8)."""

    n_points: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.n_points < 8 or self.n_points % 2 != 0:
            raise ValueError(f"n_points must be even and >= 8, got {self.n_points}")
        if not self.length > 0.0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """k_j = 2*pi*j/L in the standard symmetric FFT layout."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points) * (TWO_PI / self.length)

    @cached_property
    def wavenumbers_half(self) -> np.ndarray:
        """Nonnegative wavenumbers matching numpy's rfft layout."""
        return np.fft.rfftfreq(self.n_points, d=1.0 / self.n_points) * (TWO_PI / self.length)

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        """Boolean rfft-layout mask keeping |mode index| <= floor(N/3)."""
        cutoff = self.n_points // 3
        return np.arange(self.n_points // 2 + 1) <= cutoff


def _check_same_grid(a: "RealField", b: "RealField") -> None:
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass
class RealField:
    """Real grid function; values are physical-space samples on grid.nodes."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.grid.n_points},)")
        self.values = v

    def copy(self) -> "RealField":
        return RealField(self.grid, self.values.copy())

    def check_finite(self) -> "RealField":
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains NaN/Inf")
        return self

    # arithmetic conveniences used throughout the solvers
    def __add__(self, other):
        if isinstance(other, RealField):
            _check_same_grid(self, other)
            return RealField(self.grid, self.values + other.values)
        return RealField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, RealField):
            _check_same_grid(self, other)
            return RealField(self.grid, self.values - other.values)
        return RealField(self.grid, self.values - other)

    def __rsub__(self, other):
        return RealField(self.grid, other - self.values)

    def __mul__(self, scalar):
        return RealField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)


def field_from_function(grid: PeriodicGrid, fn) -> RealField:
    return RealField(grid, np.asarray(fn(grid.nodes), dtype=float))


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier with a real, even-in-k symbol on the grid's wavenumbers."""

    grid: PeriodicGrid
    symbol: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.symbol, dtype=float)
        if s.shape != (self.grid.n_points,):
            raise ValueError("symbol must be sampled on the full wavenumber layout")
        object.__setattr__(self, "symbol", s)

    @classmethod
    def from_symbol(cls, grid: PeriodicGrid, fn) -> "Multiplier":
        return cls(grid, np.asarray(fn(grid.wavenumbers), dtype=float))

    @cached_property
    def _symbol_half(self) -> np.ndarray:
        # even symbol: the rfft half-spectrum [0..N/2] carries it entirely
        return self.symbol[: self.grid.n_points // 2 + 1].copy()


def deriv(f: RealField, order: int) -> RealField:
    """order-th spectral derivative of the trigonometric interpolant of f."""
    if order < 1:
        raise ValueError(f"derivative order must be >= 1, got {order}")
    k = f.grid.wavenumbers_half
    mult = (1j * k) ** order
    if order % 2 == 1:
        mult[-1] = 0.0  # Nyquist mode carries no sign information for odd derivatives
    fh = np.fft.rfft(f.values)
    return RealField(f.grid, np.fft.irfft(mult * fh, n=f.grid.n_points))


def apply_multiplier(m: Multiplier, f: RealField) -> RealField:
    if m.grid != f.grid:
        raise ValueError("multiplier and field live on different grids")
    fh = np.fft.rfft(f.values)
    return RealField(f.grid, np.fft.irfft(m._symbol_half * fh, n=f.grid.n_points))


def _dealias_values(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    vh = np.fft.rfft(v)
    vh[~grid.dealias_keep] = 0.0
    return np.fft.irfft(vh, n=grid.n_points)


def dealiased_product(f: RealField, g: RealField) -> RealField:
    """Pointwise product with 2/3-rule truncation of inputs and output."""
    _check_same_grid(f, g)
    grid = f.grid
    ft = _dealias_values(grid, f.values)
    gt = _dealias_values(grid, g.values)
    return RealField(grid, _dealias_values(grid, ft * gt))


def integrate(f: RealField) -> float:
    """Trapezoid sum over the period; spectrally exact for trig polynomials."""
    return float(f.grid.spacing * f.values.sum())


def l2_norm(f: RealField) -> float:
    return float(np.sqrt(f.grid.spacing * np.square(f.values).sum()))


def hs_norm(f: RealField, s: float) -> float:
    """Sobolev norm with symbol (1+k^2)^(s/2), evaluated by Parseval."""
    if s < 0.0:
        raise ValueError(f"Sobolev order must be >= 0, got {s}")
    n = f.grid.n_points
    fh = np.fft.rfft(f.values) / n
    weight = (1.0 + f.grid.wavenumbers_half**2) ** s
    # rfft folds conjugate modes; double all but the k=0 and Nyquist bins
    mult = np.full(n // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    return float(np.sqrt(f.grid.length * np.sum(weight * mult * np.abs(fh) ** 2)))
