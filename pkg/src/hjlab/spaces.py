"""Discrete norms and seminorms on torus fields.

Lattice sums with weight dx**d realize spatial integrals; time integrals use
the trapezoidal rule.  Shift-based seminorms (Hoelder, Nikol'skii, Slobodeckii)
range over every nonzero lattice offset with the wrap-around Euclidean
distance, which keeps them parameter-free at desk scale.

All norms factor out the sup of their argument before raising to powers, so
large exponents (p = 19, 64, ...) stay in floating-point range.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, SpaceTimeField, TorusGrid
from .spectral import gradient_values, hessian_values, shift_values

__all__ = [
    "NormReport",
    "InterpolationReport",
    "lp_norm",
    "lq_spacetime_norm",
    "time_derivative",
    "w21q_norm",
    "w2q_spatial_norm",
    "holder_seminorm",
    "holder_norm",
    "nikolskii_seminorm",
    "sobolev_slobodeckii_norm",
    "initial_datum_norm",
    "theta_gagliardo_nirenberg",
    "theta_miranda_nirenberg",
    "check_gagliardo_nirenberg",
    "check_miranda_nirenberg",
    "check_nikolskii_embedding",
]


@dataclass(frozen=True)
class NormReport:
    """A measured norm together with the exponents that define it."""

    label: str
    value: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.value >= 0 and np.isfinite(self.value)):
            raise ValueError(f"norm value must be finite and >= 0, got {self.value}")

    def to_dict(self) -> dict:
        return {"label": self.label, "value": self.value, "parameters": dict(self.parameters)}


@dataclass(frozen=True)
class InterpolationReport:
    """One inequality evaluation: measured sides and their ratio."""

    label: str
    lhs: float
    rhs: float
    ratio: float
    degenerate: bool
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "degenerate": self.degenerate,
            "parameters": dict(self.parameters),
        }


def _powered_sum(a: np.ndarray, p: float, weight: float) -> float:
    """weight * sum(a**p), computed with the peak factored out; returns the norm."""
    peak = float(a.max(initial=0.0))
    if peak == 0.0:
        return 0.0
    return peak * float(np.sum((a / peak) ** p) * weight) ** (1.0 / p)


def lp_norm(u: Field, p: float) -> float:
    """(integral |u|^p dx)^(1/p) on the unit torus; p = inf gives the lattice max."""
    if p < 1:
        raise ValueError(f"Lebesgue exponent must satisfy p >= 1, got {p}")
    a = np.abs(u.values)
    if math.isinf(p):
        return float(a.max())
    return _powered_sum(a, p, u.grid.cell_volume)


def _trapezoid_weights(grid: TorusGrid) -> np.ndarray:
    w = np.full(grid.nt + 1, grid.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def lq_spacetime_norm(u: SpaceTimeField, q: float) -> float:
    """Space-time Lebesgue norm: lattice sum in space, trapezoid in time."""
    if q < 1:
        raise ValueError(f"Lebesgue exponent must satisfy q >= 1, got {q}")
    a = np.abs(u.values)
    if math.isinf(q):
        return float(a.max())
    peak = float(a.max())
    if peak == 0.0:
        return 0.0
    per_slice = np.sum((a / peak) ** q, axis=tuple(range(1, a.ndim))) * u.grid.cell_volume
    return peak * float(np.dot(_trapezoid_weights(u.grid), per_slice)) ** (1.0 / q)


def time_derivative(u: SpaceTimeField) -> SpaceTimeField:
    """Second-order time derivative: centered inside, one-sided at t = 0, T."""
    if u.grid.nt < 2:
        raise ValueError("time derivative needs nt >= 2")
    v = u.values
    dt = u.grid.dt
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)
    return SpaceTimeField(u.grid, out)


def _second_derivative_terms(grid: TorusGrid, a: np.ndarray) -> list[np.ndarray]:
    """One array per second-order multi-index (mixed derivatives counted once)."""
    hess = hessian_values(grid, a)
    return [hess[i, j] for i in range(grid.d) for j in range(i, grid.d)]


def w21q_norm(u: SpaceTimeField, q: float) -> float:
    """Parabolic Sobolev norm aggregating u, Du, D^2 u and du/dt in L^q(Q_T).

    The aggregate is (sum over terms of ||term||_q^q)^(1/q), one term per
    multi-index with |beta| + 2r <= 2 (mixed spatial derivatives once each).
    """
    if not (1 <= q < math.inf):
        raise ValueError(f"need a finite exponent q >= 1, got {q}")
    grid = u.grid
    terms = [u.values]
    terms.extend(gradient_values(grid, u.values))
    terms.extend(_second_derivative_terms(grid, u.values))
    terms.append(time_derivative(u).values)
    norms = [lq_spacetime_norm(SpaceTimeField(grid, np.ascontiguousarray(t)), q) for t in terms]
    peak = max(norms)
    if peak == 0.0:
        return 0.0
    return peak * float(sum((nv / peak) ** q for nv in norms)) ** (1.0 / q)


def w2q_spatial_norm(u: Field, q: float) -> float:
    """Stationary W^{2,q} norm: (||u||_q^q + ||Du||_q^q + ||D^2 u||_q^q)^(1/q).

    Du and D^2 u enter through their pointwise Euclidean/Frobenius magnitudes.
    """
    if not (1 <= q < math.inf):
        raise ValueError(f"need a finite exponent q >= 1, got {q}")
    grid = u.grid
    grad = gradient_values(grid, u.values)
    hess = hessian_values(grid, u.values)
    mags = [
        np.abs(u.values),
        np.sqrt(np.sum(grad**2, axis=0)),
        np.sqrt(np.sum(hess**2, axis=(0, 1))),
    ]
    norms = [_powered_sum(m, q, grid.cell_volume) for m in mags]
    peak = max(norms)
    if peak == 0.0:
        return 0.0
    return peak * float(sum((nv / peak) ** q for nv in norms)) ** (1.0 / q)


def _nonzero_offsets(grid: TorusGrid):
    """Yield (cells, wrapped Euclidean distance) for every nonzero offset."""
    half = 0.5
    for cells in itertools.product(range(grid.n), repeat=grid.d):
        if all(c == 0 for c in cells):
            continue
        frac = np.asarray(cells, dtype=float) * grid.dx
        frac = np.abs(frac - np.round(frac))
        frac = np.minimum(frac, half)  # guard against rounding at exactly 1/2
        yield cells, float(np.sqrt(np.sum(frac**2)))


def holder_seminorm(u: Field, alpha: float) -> float:
    """sup over nonzero lattice offsets of ||u - shift(u)||_inf / dist^alpha."""
    if not (0 < alpha <= 1):
        raise ValueError(f"Hoelder exponent must lie in (0, 1], got {alpha}")
    v = u.values
    best = 0.0
    for cells, dist in _nonzero_offsets(u.grid):
        inc = float(np.max(np.abs(v - shift_values(u.grid, v, cells))))
        best = max(best, inc / dist**alpha)
    return best


def holder_norm(u: Field, alpha: float) -> float:
    """||u||_inf + Hoelder seminorm."""
    return float(np.max(np.abs(u.values))) + holder_seminorm(u, alpha)


def nikolskii_seminorm(u: Field, mu: float, p: float) -> float:
    """sup over nonzero lattice offsets of dist^(-mu) ||u - shift(u)||_p."""
    if not (0 < mu < 1):
        raise ValueError(f"Nikol'skii exponent must lie in (0, 1), got {mu}")
    if p < 1:
        raise ValueError(f"Lebesgue exponent must satisfy p >= 1, got {p}")
    v = u.values
    best = 0.0
    for cells, dist in _nonzero_offsets(u.grid):
        inc = Field(u.grid, np.abs(v - shift_values(u.grid, v, cells)))
        best = max(best, lp_norm(inc, p) / dist**mu)
    return best


def _slobodeckii_seminorm(u_values: np.ndarray, grid: TorusGrid, s: float, p: float) -> float:
    """Double lattice sum (integral in x and h) of |u(x+h)-u(x)|^p / |h|^{d+sp}."""
    cell = grid.cell_volume
    osc = float(np.max(u_values) - np.min(u_values))
    if osc == 0.0:
        return 0.0
    total = 0.0
    for cells, dist in _nonzero_offsets(grid):
        inc = np.abs(u_values - shift_values(grid, u_values, cells)) / osc
        total += float(np.sum(inc**p)) * cell * cell / dist ** (grid.d + s * p)
    return osc * total ** (1.0 / p)


def sobolev_slobodeckii_norm(u: Field, s: float, p: float) -> float:
    """Fractional Sobolev norm of order s in (0, 2), s not an integer.

    For s in (0,1): ||u||_p plus the Slobodeckii seminorm (diagonal cell
    excluded; the kernel is summable for sp < p + d after exclusion).  For s
    in (1,2) the construction applies to u and each gradient component.
    """
    if p < 1:
        raise ValueError(f"Lebesgue exponent must satisfy p >= 1, got {p}")
    if not (0 < s < 2) or s == 1:
        raise ValueError(f"fractional order must lie in (0,1) or (1,2), got {s}")
    if s < 1:
        return lp_norm(u, p) + _slobodeckii_seminorm(u.values, u.grid, s, p)
    grad = gradient_values(u.grid, u.values)
    total = lp_norm(u, p)
    sigma = s - 1.0
    sems = []
    for comp in grad:
        total += _powered_sum(np.abs(comp), p, u.grid.cell_volume)
        sems.append(_slobodeckii_seminorm(comp, u.grid, sigma, p))
    peak = max(sems)
    if peak > 0:
        total += peak * float(sum((sv / peak) ** p for sv in sems)) ** (1.0 / p)
    return total


def initial_datum_norm(u0: Field, q: float) -> float:
    """Trace-space norm of order 2 - 2/q used for initial data.

    Degenerates gracefully at the integer orders: s = 0 gives L^q and s = 1
    gives W^{1,q}; otherwise the Slobodeckii realization of order s.
    """
    s = 2.0 - 2.0 / q
    if s <= 1e-12:
        return lp_norm(u0, q)
    if abs(s - 1.0) <= 1e-12:
        grad = gradient_values(u0.grid, u0.values)
        return lp_norm(u0, q) + _powered_sum(
            np.sqrt(np.sum(grad**2, axis=0)), q, u0.grid.cell_volume
        )
    return sobolev_slobodeckii_norm(u0, s, q)


# -- interpolation inequality checks -----------------------------------------


def theta_gagliardo_nirenberg(gamma: float, q: float, s: float, d: int) -> float:
    """theta solving 1/(gamma q) = 1/d + theta (1/q - 2/d) + (1-theta)/s."""
    inv_s = 0.0 if math.isinf(s) else 1.0 / s
    num = 1.0 / d + inv_s - 1.0 / (gamma * q)
    den = 2.0 / d + inv_s - 1.0 / q
    return num / den


def theta_miranda_nirenberg(gamma: float, q: float, alpha: float, d: int) -> float:
    """theta solving 1/(gamma q) = 1/d + theta (1/q - 2/d) - (1-theta) alpha/d."""
    num = 1.0 / (gamma * q) - (1.0 - alpha) / d
    den = 1.0 / q - (2.0 - alpha) / d
    return num / den


def _require_identity(lhs: float, rhs: float, label: str) -> None:
    if abs(lhs - rhs) > 1e-10:
        raise ValueError(f"{label} exponent identity violated: {lhs} != {rhs}")


def check_gagliardo_nirenberg(
    u: Field, gamma: float, q: float, s: float, theta: float
) -> InterpolationReport:
    """Ratio ||Du||_{gamma q} / (||u||_{W^{2,q}}^theta ||u||_{L^s}^{1-theta})."""
    d = u.grid.d
    inv_s = 0.0 if math.isinf(s) else 1.0 / s
    _require_identity(
        1.0 / (gamma * q),
        1.0 / d + theta * (1.0 / q - 2.0 / d) + (1.0 - theta) * inv_s,
        "Gagliardo-Nirenberg",
    )
    grad = gradient_values(u.grid, u.values)
    lhs = _powered_sum(np.sqrt(np.sum(grad**2, axis=0)), gamma * q, u.grid.cell_volume)
    rhs = w2q_spatial_norm(u, q) ** theta * lp_norm(u, s) ** (1.0 - theta)
    degenerate = rhs == 0.0
    ratio = math.nan if degenerate else lhs / rhs
    return InterpolationReport(
        "gagliardo-nirenberg", lhs, rhs, ratio, degenerate,
        {"gamma": gamma, "q": q, "s": s, "theta": theta},
    )


def check_miranda_nirenberg(
    u: Field, gamma: float, q: float, alpha: float, theta: float
) -> InterpolationReport:
    """Ratio ||Du||_{gamma q} / (||u||_{W^{2,q}}^theta ||u||_{C^alpha}^{1-theta})."""
    d = u.grid.d
    _require_identity(
        1.0 / (gamma * q),
        1.0 / d + theta * (1.0 / q - 2.0 / d) - (1.0 - theta) * alpha / d,
        "Miranda-Nirenberg",
    )
    grad = gradient_values(u.grid, u.values)
    lhs = _powered_sum(np.sqrt(np.sum(grad**2, axis=0)), gamma * q, u.grid.cell_volume)
    rhs = w2q_spatial_norm(u, q) ** theta * holder_norm(u, alpha) ** (1.0 - theta)
    degenerate = rhs == 0.0
    ratio = math.nan if degenerate else lhs / rhs
    return InterpolationReport(
        "miranda-nirenberg", lhs, rhs, ratio, degenerate,
        {"gamma": gamma, "q": q, "alpha": alpha, "theta": theta},
    )


def check_nikolskii_embedding(u: Field, alpha: float, p: float) -> InterpolationReport:
    """Ratio [u]_{N^{alpha,p}} / ||u||_{W^{alpha,p}}."""
    lhs = nikolskii_seminorm(u, alpha, p)
    rhs = sobolev_slobodeckii_norm(u, alpha, p)
    degenerate = rhs == 0.0
    ratio = math.nan if degenerate else lhs / rhs
    return InterpolationReport(
        "nikolskii-embedding", lhs, rhs, ratio, degenerate, {"alpha": alpha, "p": p}
    )
