"""Periodic lattice on the unit torus and the field containers that live on it.

Everything in the laboratory is sampled on a uniform lattice over [0,1)^d with
periodic identification, optionally extended by a uniform time axis [0,T].
Grids and fields are immutable after construction and safe to share across
threads; all operators elsewhere in the package are pure functions of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

__all__ = ["TorusGrid", "Field", "VectorField", "SpaceTimeField"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _freeze(values: np.ndarray) -> np.ndarray:
    """Return a read-only float64 view, copying only when required."""
    v = np.asarray(values, dtype=float)
    if v.flags.writeable:
        if not v.flags.owndata:
            v = v.copy()
        v.flags.writeable = False
    return v


@dataclass(frozen=True)
class TorusGrid:
    """Uniform lattice on the unit torus [0,1)^d times the interval [0,T].

    Parameters
    ----------
    d : spatial dimension, 1 to 3.
    n : lattice points per dimension; a power of two, at least 8.
    T : time horizon (dimensionless units).
    nt : number of time steps; slice j lives at time j*dt with dt = T/nt.

    dx*n = 1 holds exactly, so lattice sums with weight dx**d are integrals
    over the unit-volume torus.
    """

    d: int
    n: int
    T: float
    nt: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or not _is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"time horizon must be positive and finite, got {self.T}")
        if int(self.nt) < 1:
            raise ValueError(f"nt must be >= 1, got {self.nt}")

    # -- lattice geometry ---------------------------------------------------

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @cached_property
    def axis(self) -> np.ndarray:
        a = np.arange(self.n) * self.dx
        a.flags.writeable = False
        return a

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays, one per dimension, broadcastable to `shape`."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij", sparse=True)
        for m in mesh:
            m.flags.writeable = False
        return tuple(mesh)

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.nt + 1)
        t.flags.writeable = False
        return t

    # -- spectral layout (real FFT over the last axis) ----------------------

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    @cached_property
    def freq(self) -> tuple[np.ndarray, ...]:
        """Integer mode numbers per axis, broadcastable to `spectral_shape`."""
        full = np.fft.fftfreq(self.n) * self.n
        half = np.fft.rfftfreq(self.n) * self.n
        mesh = np.meshgrid(*([full] * (self.d - 1) + [half]), indexing="ij", sparse=True)
        for m in mesh:
            m.flags.writeable = False
        return tuple(mesh)

    @cached_property
    def k2(self) -> np.ndarray:
        """|2 pi k|^2, the Fourier symbol of -Laplacian."""
        out = np.zeros(self.spectral_shape)
        for f in self.freq:
            out = out + (2.0 * np.pi * f) ** 2
        out.flags.writeable = False
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_j| <= n/3 along every axis."""
        cut = self.n / 3.0
        keep = np.ones(self.spectral_shape, dtype=bool)
        for f in self.freq:
            keep = keep & (np.abs(f) <= cut)
        keep.flags.writeable = False
        return keep

    # -- derived grids -------------------------------------------------------

    def with_time(self, T: float, nt: int) -> "TorusGrid":
        return TorusGrid(self.d, self.n, T, nt)

    def refined(self, space: int = 2, time: int = 4) -> "TorusGrid":
        """Standard refinement step: n doubles, nt quadruples."""
        return TorusGrid(self.d, self.n * space, self.T, self.nt * time)


@dataclass(frozen=True)
class Field:
    """Real scalar samples on the spatial lattice of a grid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = _freeze(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample fn(x1, ..., xd) on the lattice."""
        raw = np.asarray(fn(*grid.x), dtype=float)
        return cls(grid, np.broadcast_to(raw, grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    def mean(self) -> float:
        """Integral over the unit-volume torus."""
        return float(self.values.mean())

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class VectorField:
    """d real components on the spatial lattice, stored as one (d, n, ..., n) array."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = _freeze(self.values)
        if v.shape != (self.grid.d,) + self.grid.shape:
            raise ValueError(
                f"vector field shape {v.shape} does not match {(self.grid.d,) + self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field contains non-finite samples")
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, grid: TorusGrid) -> "VectorField":
        return cls(grid, np.zeros((grid.d,) + grid.shape))

    @classmethod
    def from_fields(cls, components: tuple[Field, ...]) -> "VectorField":
        grid = components[0].grid
        return cls(grid, np.stack([c.values for c in components]))

    def component(self, i: int) -> Field:
        return Field(self.grid, self.values[i])

    def magnitude(self) -> Field:
        return Field(self.grid, np.sqrt(np.sum(self.values**2, axis=0)))


@dataclass(frozen=True)
class SpaceTimeField:
    """nt+1 spatial slices on a shared grid; slice j lives at time j*dt."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = _freeze(self.values)
        expected = (self.grid.nt + 1,) + self.grid.shape
        if v.shape != expected:
            raise ValueError(f"space-time shape {v.shape} does not match {expected}")
        if not np.all(np.isfinite(v)):
            raise ValueError("space-time field contains non-finite samples")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn: Callable[..., np.ndarray]) -> "SpaceTimeField":
        """Sample fn(t, x1, ..., xd) on every time slice."""
        out = np.empty((grid.nt + 1,) + grid.shape)
        for j, t in enumerate(grid.times):
            out[j] = np.broadcast_to(np.asarray(fn(t, *grid.x), dtype=float), grid.shape)
        return cls(grid, out)

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "SpaceTimeField":
        return cls(grid, np.full((grid.nt + 1,) + grid.shape, float(c)))

    @classmethod
    def from_slices(cls, grid: TorusGrid, slices: list[Field]) -> "SpaceTimeField":
        if len(slices) != grid.nt + 1:
            raise ValueError(f"expected {grid.nt + 1} slices, got {len(slices)}")
        for s in slices:
            if s.grid.shape != grid.shape:
                raise ValueError("slice grid does not match")
        return cls(grid, np.stack([s.values for s in slices]))

    def slice(self, j: int) -> Field:
        return Field(self.grid, self.values[j])

    def initial(self) -> Field:
        return self.slice(0)

    def terminal(self) -> Field:
        return self.slice(self.grid.nt)

    def reversed(self) -> "SpaceTimeField":
        """Slices in reversed time order (t -> T - t)."""
        return SpaceTimeField(self.grid, self.values[::-1])

    def __len__(self) -> int:
        return self.values.shape[0]
