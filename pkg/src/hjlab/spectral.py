"""FFT-backed calculus on torus fields: derivatives, mollification, shifts.

All operators act on the last d axes of their array arguments, so the same
low-level routines serve single slices, (d, ...) component stacks and
(nt+1, ...) space-time batches.  Fields are real by construction: the real
transform pair rfftn/irfftn never produces an imaginary residue.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .grid import Field, TorusGrid, VectorField

__all__ = [
    "forward",
    "inverse",
    "gradient_values",
    "laplacian_values",
    "divergence_values",
    "hessian_values",
    "gradient",
    "laplacian",
    "divergence",
    "heat_mollify",
    "shift",
    "shift_values",
    "dealias",
    "wrapped_distance",
    "random_trig_polynomial",
]

_TWO_PI_I = 2.0j * np.pi


def _spatial_axes(grid: TorusGrid, a: np.ndarray) -> tuple[int, ...]:
    return tuple(range(a.ndim - grid.d, a.ndim))


def forward(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    """Real FFT over the spatial axes (the last d axes of `a`)."""
    return sfft.rfftn(a, axes=_spatial_axes(grid, a))


def inverse(grid: TorusGrid, hat: np.ndarray) -> np.ndarray:
    axes = tuple(range(hat.ndim - grid.d, hat.ndim))
    return sfft.irfftn(hat, s=grid.shape, axes=axes)


# -- low-level array operators (batched over leading axes) -------------------


def gradient_values(grid: TorusGrid, a: np.ndarray, hat: np.ndarray | None = None) -> np.ndarray:
    """Spectral gradient; output gets a leading component axis of length d."""
    if hat is None:
        hat = forward(grid, a)
    batch = hat.shape[: hat.ndim - grid.d]
    out = np.empty((grid.d,) + batch + grid.shape)
    for j, f in enumerate(grid.freq):
        out[j] = inverse(grid, _TWO_PI_I * f * hat)
    return out


def laplacian_values(grid: TorusGrid, a: np.ndarray, hat: np.ndarray | None = None) -> np.ndarray:
    if hat is None:
        hat = forward(grid, a)
    return inverse(grid, -grid.k2 * hat)


def divergence_values(grid: TorusGrid, vec: np.ndarray) -> np.ndarray:
    """Spectral divergence of a (d, ..., n, ..., n) component stack."""
    acc = None
    for j, f in enumerate(grid.freq):
        term = _TWO_PI_I * f * forward(grid, vec[j])
        acc = term if acc is None else acc + term
    return inverse(grid, acc)


def hessian_values(grid: TorusGrid, a: np.ndarray, hat: np.ndarray | None = None) -> np.ndarray:
    """All second derivatives; output shape (d, d, ..., n, ..., n)."""
    if hat is None:
        hat = forward(grid, a)
    batch = hat.shape[: hat.ndim - grid.d]
    out = np.empty((grid.d, grid.d) + batch + grid.shape)
    for i, fi in enumerate(grid.freq):
        for j, fj in enumerate(grid.freq):
            if j < i:
                out[i, j] = out[j, i]
                continue
            out[i, j] = inverse(grid, -(2.0 * np.pi) ** 2 * fi * fj * hat)
    return out


def phi1(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1)/z, series-stabilized near zero."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[~small]
    out[~small] = np.expm1(zs) / zs
    zt = z[small]
    out[small] = 1.0 + zt / 2.0 + zt**2 / 6.0
    return out


def phi2(z: np.ndarray) -> np.ndarray:
    """(exp(z) - 1 - z)/z^2, series-stabilized near zero."""
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    zs = z[~small]
    out[~small] = (np.expm1(zs) - zs) / zs**2
    zt = z[small]
    out[small] = 0.5 + zt / 6.0 + zt**2 / 24.0
    return out


def heat_values(grid: TorusGrid, a: np.ndarray, s: float) -> np.ndarray:
    if s < 0:
        raise ValueError(f"mollification time must be >= 0, got {s}")
    if s == 0:
        return np.array(a, dtype=float, copy=True)
    return inverse(grid, np.exp(-grid.k2 * s) * forward(grid, a))


def dealias_values(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    return inverse(grid, grid.dealias_mask * forward(grid, a))


def _lattice_offset(grid: TorusGrid, offset: Sequence[float]) -> tuple[int, ...]:
    """Convert a physical offset (components multiples of dx) to whole cells."""
    off = np.atleast_1d(np.asarray(offset, dtype=float))
    if off.shape != (grid.d,):
        raise ValueError(f"offset must have {grid.d} components, got shape {off.shape}")
    cells = off * grid.n
    rounded = np.round(cells)
    if not np.allclose(cells, rounded, atol=1e-9):
        raise ValueError(f"offset {offset!r} is not an integer multiple of dx = 1/{grid.n}")
    return tuple(int(m) for m in rounded)


def shift_values(grid: TorusGrid, a: np.ndarray, cells: Sequence[int]) -> np.ndarray:
    """Periodic translation by whole cells: out(x) = a(x - cells*dx)."""
    return np.roll(a, shift=tuple(int(c) for c in cells), axis=_spatial_axes(grid, a))


def wrapped_distance(grid: TorusGrid, cells: Sequence[int]) -> float:
    """Geodesic (wrap-around) Euclidean length of a lattice offset."""
    frac = np.asarray(cells, dtype=float) * grid.dx
    frac = frac - np.round(frac)
    return float(np.sqrt(np.sum(frac**2)))


# -- Field-level wrappers -----------------------------------------------------


def gradient(u: Field) -> VectorField:
    """Spectral gradient Du; exact on modes below the Nyquist frequency."""
    return VectorField(u.grid, gradient_values(u.grid, u.values))


def laplacian(u: Field) -> Field:
    return Field(u.grid, laplacian_values(u.grid, u.values))


def divergence(v: VectorField) -> Field:
    return Field(v.grid, divergence_values(v.grid, v.values))


def heat_mollify(u: Field, s: float) -> Field:
    """Convolve with the heat kernel at time s >= 0 (s = 0 is the identity)."""
    if s == 0:
        return u
    return Field(u.grid, heat_values(u.grid, u.values, s))


def shift(u: Field, offset: Sequence[float]) -> Field:
    """Periodic translation: shift(u, xi)(x) = u(x - xi).

    Offset components are physical coordinates and must be exact integer
    multiples of dx; a full period (1.0) is the identity.
    """
    cells = _lattice_offset(u.grid, offset)
    return Field(u.grid, shift_values(u.grid, u.values, cells))


def dealias(u: Field) -> Field:
    """Project onto the 2/3-rule mode set."""
    return Field(u.grid, dealias_values(u.grid, u.values))


def random_trig_polynomial(
    grid: TorusGrid,
    max_mode: int,
    rng: np.random.Generator,
    amplitude: float = 1.0,
) -> Field:
    """Random real trigonometric polynomial with modes |k_j| <= max_mode.

    Coefficients are complex Gaussians; the sample is rescaled so its sup norm
    equals `amplitude` (unless it degenerates to zero).
    """
    if max_mode < 1:
        raise ValueError("max_mode must be >= 1")
    if max_mode > grid.n // 3:
        raise ValueError(f"max_mode {max_mode} exceeds the dealiased band n/3 = {grid.n // 3}")
    keep = np.ones(grid.spectral_shape, dtype=bool)
    for f in grid.freq:
        keep = keep & (np.abs(f) <= max_mode)
    count = int(keep.sum())
    hat = np.zeros(grid.spectral_shape, dtype=complex)
    hat[keep] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    vals = inverse(grid, hat)
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = vals * (amplitude / peak)
    return Field(grid, vals)
