"""
Periodic grids, Fourier transforms and spatial norms.

The box [-L/2, L/2)^d stands in for R^d. Spectral coefficients are scaled so
that they approximate the continuum transform

    f^(xi) = int f(x) exp(-i x.xi) dx,

i.e. the forward FFT carries the quadrature weight h^d and the phase factor
(-1)^k that accounts for the box starting at -L/2. With this convention

    ||f||_{L^2}^2 = sum |f_j|^2 h^d = L^{-d} sum |f^_k|^2

and the transform of a pointwise product is the lattice convolution of the
coefficients divided by L^d.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

PHYSICAL = "physical"
SPECTRAL = "spectral"


def fft_workers() -> int:
    """Thread count for the FFT backend, capped by ``GP_THREADS``."""
    try:
        return max(1, int(os.environ.get("GP_THREADS", "1")))
    except ValueError:
        return 1


class ZeroModeError(ValueError):
    """A singular multiplier met a field with a non-negligible zero mode."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^dim and its dual lattice."""

    dim: int
    n: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def volume(self) -> float:
        return self.box_length**self.dim

    @property
    def dk(self) -> float:
        """Lattice spacing 2*pi/L of the frequency grid."""
        return 2 * np.pi / self.box_length

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Per-axis frequencies 2*pi*k/L, k = -n/2..n/2-1, in FFT order."""
        return self.dk * sfft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def x(self) -> np.ndarray:
        return -self.box_length / 2 + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple:
        return tuple(np.meshgrid(*([self.x] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def kvec(self) -> tuple:
        return tuple(np.meshgrid(*([self.frequencies] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self.kvec))

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(c * c for c in self.coords)

    @cached_property
    def _sign(self) -> np.ndarray:
        idx = np.rint(sfft.fftfreq(self.n, d=1.0 / self.n)).astype(int)
        s1 = np.where(idx % 2 == 0, 1.0, -1.0)
        out = s1
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, s1)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        idx = np.abs(np.rint(sfft.fftfreq(self.n, d=1.0 / self.n)))
        keep = idx <= self.n / 3
        out = keep
        for _ in range(self.dim - 1):
            out = np.logical_and.outer(out, keep)
        return out

    def reflect(self, a: np.ndarray) -> np.ndarray:
        """Return the lattice array evaluated at -k (index k -> -k mod n)."""
        axes = tuple(range(a.ndim - self.dim, a.ndim))
        return np.roll(np.flip(a, axis=axes), 1, axis=axes)

    # raw transforms on arrays; Field methods wrap these
    def fwd(self, a: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.fftn(a, axes=axes, workers=fft_workers()) * (self._sign * self.h**self.dim)

    def inv(self, a: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.ifftn(a * (self._sign / self.h**self.dim), axes=axes, workers=fft_workers())


def make_grid(dim: int, n: int, box_length: float) -> Grid:
    return Grid(int(dim), int(n), float(box_length))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field on a Grid, held in one of two representations.

    ``dropped_zero_mode`` records the xi=0 coefficient discarded by the last
    singular multiplier that produced this field (0 when nothing was dropped).
    """

    grid: Grid
    values: np.ndarray
    representation: str = PHYSICAL
    dropped_zero_mode: complex = 0.0

    def __post_init__(self):
        if self.representation not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid, representation: str = PHYSICAL) -> "Field":
        return cls(grid, np.zeros(grid.shape, complex), representation)

    def physical(self) -> "Field":
        return self if self.representation == PHYSICAL else to_physical(self)

    def spectral(self) -> "Field":
        return self if self.representation == SPECTRAL else to_spectral(self)

    @property
    def real(self) -> np.ndarray:
        return self.physical().values.real

    @property
    def imag(self) -> np.ndarray:
        return self.physical().values.imag

    def with_values(self, values: np.ndarray, **kw) -> "Field":
        return replace(self, values=values, **kw)

    def _binary(self, other, op):
        if isinstance(other, Field):
            other = other.spectral() if self.representation == SPECTRAL else other.physical()
            return Field(self.grid, op(self.values, other.values), self.representation)
        return Field(self.grid, op(self.values, other), self.representation)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        if isinstance(other, Field):
            raise TypeError("use pointwise helpers for field products")
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values, self.representation)


def to_spectral(f: Field) -> Field:
    if f.representation != PHYSICAL:
        raise ValueError("to_spectral expects a physical field")
    return Field(f.grid, f.grid.fwd(f.values), SPECTRAL, f.dropped_zero_mode)


def to_physical(f: Field) -> Field:
    if f.representation != SPECTRAL:
        raise ValueError("to_physical expects a spectral field")
    return Field(f.grid, f.grid.inv(f.values), PHYSICAL, f.dropped_zero_mode)


# --------------------------------------------------------------------------
# multipliers

SymbolFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Multiplier:
    """Radial symbol m(|xi|) plus a flag for a singularity at xi = 0."""

    fn: SymbolFn
    singular_at_zero: bool = False
    name: str = ""

    def on(self, grid: Grid) -> np.ndarray:
        r = grid.kabs
        if not self.singular_at_zero:
            return np.asarray(self.fn(r), dtype=float) * np.ones(grid.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.asarray(self.fn(np.where(r > 0, r, 1.0)), dtype=float) * np.ones(grid.shape)
        m.flat[0] = 0.0
        return m


def apply_multiplier(f: Field, m, zero_mode: str = "drop", tol: float = 1e-12) -> Field:
    """Multiply spectral coefficients pointwise by a symbol.

    ``m`` may be a :class:`Multiplier`, a SymbolId from :mod:`operators`, a
    radial callable, or an array on the lattice. For singular symbols the
    xi=0 output coefficient is zeroed; ``zero_mode="reject"`` raises instead
    when the input zero mode exceeds ``tol`` times the largest coefficient.
    The representation of ``f`` is preserved.
    """
    from . import operators  # late import, operators builds on this module

    grid = f.grid
    if isinstance(m, operators.SymbolId):
        m = operators.multiplier(m)
    if isinstance(m, Multiplier):
        singular = m.singular_at_zero
        arr = m.on(grid)
    elif callable(m):
        singular = False
        arr = np.asarray(m(grid.kabs), dtype=float)
    else:
        singular = False
        arr = np.asarray(m)
    g = f.spectral().values
    dropped = 0.0
    if singular:
        dropped = complex(g.flat[0])
        if zero_mode == "reject" and abs(dropped) > tol * max(np.abs(g).max(), 1e-300):
            raise ZeroModeError(f"zero mode {abs(dropped):.3e} under a singular symbol")
    out = Field(grid, g * arr, SPECTRAL, dropped)
    return out if f.representation == SPECTRAL else to_physical(out)


def dealias(f: Field) -> Field:
    """2/3 rule: drop coefficients whose index exceeds n/3 on any axis."""
    g = f.spectral()
    out = Field(f.grid, g.values * f.grid.dealias_mask, SPECTRAL)
    return out if f.representation == SPECTRAL else to_physical(out)


def gradient(f: Field) -> list:
    """Spectral gradient; returns one physical Field per axis."""
    g = f.spectral().values
    return [Field(f.grid, f.grid.inv(1j * k * g), PHYSICAL) for k in f.grid.kvec]


# --------------------------------------------------------------------------
# norms


def lp_norm(f: Field, p: float) -> float:
    """Riemann-sum L^p norm; ``p = inf`` gives the max modulus."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.physical().values)
    if np.isinf(p):
        return float(a.max())
    h_d = f.grid.h**f.grid.dim
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * h_d))
    return float((np.sum(a**p) * h_d) ** (1.0 / p))


def _weight(grid: Grid, s: float, homogeneous: bool) -> np.ndarray:
    r = grid.kabs
    if homogeneous:
        with np.errstate(divide="ignore"):
            w = np.where(r > 0, r, 1.0) ** s
        w = np.array(w, dtype=float)
        w.flat[0] = 0.0
        return w
    return (1.0 + r * r) ** (s / 2)


def sobolev_norm(f: Field, s: float, homogeneous: bool = False) -> float:
    """H^s (weight <xi>^s) or homogeneous H^s (weight |xi|^s, zero mode dropped)."""
    g = f.spectral().values
    w = _weight(f.grid, s, homogeneous)
    return float(np.sqrt(np.sum((w * np.abs(g)) ** 2) / f.grid.volume))


@dataclass(frozen=True)
class DyadicPartition:
    """Smooth Littlewood-Paley blocks chi_j(|xi|) on a grid's lattice.

    Block j is centred at |xi| = 2^j; in log2 units each block is flat on
    |s - j| <= (1 - taper)/2 and falls off with a cosine taper of width
    ``taper`` (so ``taper=1`` is the classical cos^2 bump on |s - j| <= 1).
    Narrow tapers keep sum chi_j^2 close to 1, which the L^2 comparison needs.
    """

    grid: Grid
    taper: float = 0.02
    blocks: np.ndarray = field(init=False, repr=False)
    j_min: int = field(init=False)
    j_max: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.taper <= 1:
            raise ValueError("taper must lie in (0, 1]")
        r = self.grid.kabs
        rmin = self.grid.dk
        rmax = float(r.max())
        j_min = int(np.floor(np.log2(rmin))) - 1
        j_max = int(np.ceil(np.log2(rmax))) + 1
        s = np.log2(np.where(r > 0, r, rmin))
        blocks = np.stack([_bump(s - j, self.taper) for j in range(j_min, j_max + 1)])
        total = blocks.sum(axis=0)
        blocks = blocks / np.where(total > 0, total, 1.0)
        blocks[(slice(None),) + (0,) * self.grid.dim] = 0.0
        # keep only blocks that touch the lattice
        live = [i for i in range(len(blocks)) if blocks[i].any()]
        object.__setattr__(self, "blocks", blocks[live])
        object.__setattr__(self, "j_min", j_min + live[0])
        object.__setattr__(self, "j_max", j_min + live[-1])

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def block(self, f: Field, j: int) -> Field:
        g = f.spectral().values
        return Field(f.grid, g * self.blocks[j - self.j_min], SPECTRAL)


def _bump(s: np.ndarray, taper: float) -> np.ndarray:
    flat = (1.0 - taper) / 2
    a = np.abs(s)
    u = np.clip((a - flat) / taper, 0.0, 1.0)
    return np.where(a <= flat + taper, np.cos(np.pi * u / 2) ** 2, 0.0)


_partition_cache: dict = {}


def dyadic_partition(grid: Grid, taper: float = 0.02) -> DyadicPartition:
    key = (grid, taper)
    if key not in _partition_cache:
        _partition_cache[key] = DyadicPartition(grid, taper)
    return _partition_cache[key]


def besov_norm(f: Field, s: float, p: float, q: float, partition: DyadicPartition = None) -> float:
    """Homogeneous Besov norm: l^q over j of 2^{js} ||block_j f||_{L^p}."""
    part = partition or dyadic_partition(f.grid)
    vals = np.array([2.0 ** (j * s) * lp_norm(part.block(f, j), p) for j in part.indices])
    if np.isinf(q):
        return float(vals.max())
    return float(np.sum(vals**q) ** (1.0 / q))
