"""Divergence-form Fokker-Planck marches, backward (adjoint) and forward.

Backward template (terminal datum at t = tau = T):

    -dr/dt - Lap(rho) + div(b rho) = 0,      rho(., tau) = rho_tau,

forward template (initial datum, the coupled-system transport form):

    dm/dt - Lap(m) - div(b m) = 0,           m(., 0) = m0.

Both reduce to one forward kernel dv/dt + div(a v) = Lap(v) after time
reversal; the divergence of the dealiased flux is taken spectrally, so its
zero Fourier mode vanishes identically and mass is conserved to round-off at
every step.  Positivity is monitored, never enforced: clipping would silently
break the duality identities this laboratory exists to verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .grid import Field, SpaceTimeField, TorusGrid
from .hamiltonian import HamiltonianSpec
from .spaces import lp_norm, lq_spacetime_norm, time_derivative, _trapezoid_weights
from .spectral import forward, gradient_values, inverse, phi1, phi2

__all__ = [
    "FPProblem",
    "FPSolution",
    "PositivityError",
    "solve_fp",
    "drift_from_value_function",
    "crossed_integral",
    "check_rho_energy_estimate",
    "weak_form_defect",
    "FPEnergyReport",
]

DriftLike = Union[np.ndarray, Callable[[float], np.ndarray]]


class PositivityError(RuntimeError):
    """Undershoot beyond tolerance: the drift is under-resolved; run rejected."""

    def __init__(self, message: str, min_value: float, max_value: float):
        super().__init__(message)
        self.min_value = min_value
        self.max_value = max_value


@dataclass(frozen=True)
class FPProblem:
    """Drift, datum and orientation of one Fokker-Planck solve.

    drift is either an array of slices shaped (nt+1, d, n, ..., n) on the
    problem grid (linearly interpolated in time as needed) or a callable
    t -> (d, n, ..., n) array.  The datum is terminal for backward problems
    and initial for forward ones, and must be nonnegative.
    """

    grid: TorusGrid
    drift: DriftLike
    datum: Field
    direction: str = "backward"
    positivity_tol: float = 1e-8

    def __post_init__(self):
        if self.direction not in ("backward", "forward"):
            raise ValueError(f"direction must be backward or forward, got {self.direction!r}")
        if self.datum.grid.shape != self.grid.shape:
            raise ValueError("datum does not live on the problem grid")
        if self.datum.min() < 0:
            raise ValueError(f"datum must be nonnegative, min = {self.datum.min()}")
        if isinstance(self.drift, np.ndarray):
            expected = (self.grid.nt + 1, self.grid.d) + self.grid.shape
            if self.drift.shape != expected:
                raise ValueError(f"drift shape {self.drift.shape} != {expected}")
            if not np.all(np.isfinite(self.drift)):
                raise ValueError("drift contains non-finite samples")


@dataclass(frozen=True)
class FPSolution:
    """Solved density with conservation and positivity diagnostics.

    drift_integrability records the lattice L^{d+2}(Q_T) norm of |b| (the
    well-posedness regime asks |b| in L^p with p >= d+2); runs outside that
    regime are accepted, this is the flag readers inspect.
    """

    rho: SpaceTimeField
    mass_error: float
    min_value: float
    max_value: float
    drift_integrability: float = math.nan


def _drift_provider(problem: FPProblem) -> Callable[[float], np.ndarray]:
    drift = problem.drift
    if callable(drift):
        return drift
    slices = drift
    dt = problem.grid.dt
    nt = problem.grid.nt

    def at(t: float) -> np.ndarray:
        jf = t / dt
        j0 = int(math.floor(jf))
        if j0 >= nt:
            return slices[nt]
        if j0 < 0:
            return slices[0]
        w = jf - j0
        if w < 1e-9:
            return slices[j0]
        if w > 1.0 - 1e-9:
            return slices[j0 + 1]
        return (1.0 - w) * slices[j0] + w * slices[j0 + 1]

    return at


def solve_fp(
    problem: FPProblem,
    nt: int | None = None,
    *,
    store_every: int = 1,
    check_positivity: bool = True,
) -> FPSolution:
    """March the Fokker-Planck problem; output slices in original orientation.

    Backward problems are integrated in reversed time s = tau - t with
    velocity a(s) = b(tau - s); forward problems use velocity a(t) = -b(t).
    """
    grid = problem.grid
    if nt is None:
        nt = grid.nt
    if nt % store_every != 0:
        raise ValueError(f"store_every={store_every} must divide nt={nt}")
    backward = problem.direction == "backward"
    tau = grid.T
    b_at = _drift_provider(problem)
    if backward:
        velocity = lambda s: b_at(tau - s)
    else:
        velocity = lambda t: -b_at(t)

    dt = grid.T / nt
    mask = grid.dealias_mask
    z = -grid.k2 * dt
    decay = np.exp(z)
    w1 = dt * phi1(z)
    w2 = dt * phi2(z)

    def nonlinear(rho_hat: np.ndarray, t: float) -> np.ndarray:
        rho = inverse(grid, rho_hat)
        a = velocity(t)
        acc = None
        for j, fr in enumerate(grid.freq):
            flux_hat = mask * forward(grid, a[j] * rho)
            term = (2.0j * np.pi) * fr * flux_hat
            acc = term if acc is None else acc + term
        return -acc

    n_store = nt // store_every
    stored = np.empty((n_store + 1,) + grid.shape)
    stored[0] = problem.datum.values
    rho_hat = forward(grid, problem.datum.values)
    for step in range(nt):
        t0 = step * dt
        n0 = nonlinear(rho_hat, t0)
        stage = decay * rho_hat + w1 * n0
        n1 = nonlinear(stage, t0 + dt)
        rho_hat = stage + w2 * (n1 - n0)
        if (step + 1) % store_every == 0:
            stored[(step + 1) // store_every] = inverse(grid, rho_hat)

    if backward:
        stored = stored[::-1]
    out_grid = grid.with_time(grid.T, n_store)
    values = np.ascontiguousarray(stored)
    if not np.all(np.isfinite(values)):
        raise PositivityError("density lost finiteness during the march", -math.inf, math.inf)

    mass0 = problem.datum.mean()
    masses = values.mean(axis=tuple(range(1, values.ndim)))
    mass_error = float(np.max(np.abs(masses - mass0)))
    if mass_error > 1e-10 * max(1.0, abs(mass0)):
        raise RuntimeError(f"mass conservation broke: drift {mass_error}")  # internal error

    vmin = float(values.min())
    vmax = float(values.max())
    if check_positivity and vmin < -problem.positivity_tol * max(vmax, 1e-300):
        raise PositivityError(
            f"min rho = {vmin} below -{problem.positivity_tol} * max rho = {vmax}",
            vmin,
            vmax,
        )
    values.flags.writeable = False
    drift_norm = _drift_lattice_norm(problem, b_at, nt)
    return FPSolution(SpaceTimeField(out_grid, values), mass_error, vmin, vmax, drift_norm)


def _drift_lattice_norm(problem: FPProblem, b_at, nt: int) -> float:
    """Space-time L^{d+2} norm of |b| on a coarse slice subsample."""
    grid = problem.grid
    power = grid.d + 2.0
    step = max(1, nt // 32)
    total = 0.0
    count = 0
    for j in range(0, nt + 1, step):
        b = b_at(grid.T * j / nt)
        mag2 = np.sum(np.asarray(b) ** 2, axis=0)
        peak = float(np.sqrt(mag2.max(initial=0.0)))
        if peak > 0:
            total += float(np.sum((np.sqrt(mag2) / peak) ** power)) * grid.cell_volume * peak**power
        count += 1
    if count == 0:
        return 0.0
    return (total * grid.T / count) ** (1.0 / power)


def drift_from_value_function(spec: HamiltonianSpec, u: SpaceTimeField) -> np.ndarray:
    """Adjoint drift slices b = -D_pH(x, Du) for the backward template.

    This is the sign for which the duality identity couples the backward
    density to the Hamilton-Jacobi solution (mass moves along -D_pH, exactly
    as in the forward transport equation of the coupled system).
    """
    grid = u.grid
    du = gradient_values(grid, u.values)  # (d, nt+1, ...)
    out = np.empty((grid.nt + 1, grid.d) + grid.shape)
    for j in range(grid.nt + 1):
        out[j] = -spec.dp_hamiltonian(du[:, j])
    return out


def crossed_integral(
    rho: SpaceTimeField, w: SpaceTimeField, m_prime: float, spec: HamiltonianSpec
) -> float:
    """Space-time integral of |D_pH(x, Dw)|^{m'} rho."""
    if m_prime <= 0:
        raise ValueError(f"exponent must be positive, got {m_prime}")
    grid = rho.grid
    if w.grid.shape != grid.shape or len(w) != len(rho):
        raise ValueError("density and value function live on different lattices")
    dw = gradient_values(grid, w.values)
    weights = _trapezoid_weights(grid)
    total = 0.0
    for j in range(grid.nt + 1):
        dph = spec.dp_hamiltonian(dw[:, j])
        mag = np.sqrt(np.sum(dph**2, axis=0))
        total += weights[j] * float(np.sum(mag**m_prime * rho.values[j])) * grid.cell_volume
    return total


@dataclass(frozen=True)
class FPEnergyReport:
    """Measured sides of the drift-weighted energy estimate."""

    lhs: float            # W^{1,0}_{sigma'} norm of rho
    crossed: float        # integral of |b|^{m'} rho
    datum_norm: float     # L^{p'} norm of the terminal datum
    ratio: float
    sigma_prime: float
    m_prime: float
    p_prime: float


def check_rho_energy_estimate(
    rho: SpaceTimeField,
    drift: np.ndarray,
    sigma_prime: float,
    rho_tau: Field,
) -> FPEnergyReport:
    """Ratio of the W^{1,0}_{sigma'} norm of rho to the drift-weighted bound.

    sigma' must lie strictly between (d+2)/(d+1) and d+2 (the boundary and the
    endpoints are rejected); then sigma is its conjugate, m' = 1 + (d+2)/sigma
    and p' = d sigma / (sigma (d+1) - (d+2)).
    """
    grid = rho.grid
    d = grid.d
    lo = (d + 2.0) / (d + 1.0)
    if not (lo < sigma_prime < d + 2.0):
        raise ValueError(
            f"sigma' must lie in ({lo}, {d + 2}), got {sigma_prime}"
        )
    sigma = sigma_prime / (sigma_prime - 1.0)
    m_prime = 1.0 + (d + 2.0) / sigma
    p_prime = d * sigma / (sigma * (d + 1.0) - (d + 2.0))

    lhs = lq_spacetime_norm(rho, sigma_prime)
    grad = gradient_values(grid, rho.values)
    for comp in grad:
        lhs += lq_spacetime_norm(SpaceTimeField(grid, np.ascontiguousarray(comp)), sigma_prime)

    weights = _trapezoid_weights(grid)
    crossed = 0.0
    for j in range(grid.nt + 1):
        mag = np.sqrt(np.sum(drift[j] ** 2, axis=0))
        crossed += weights[j] * float(np.sum(mag**m_prime * rho.values[j])) * grid.cell_volume
    datum_norm = lp_norm(rho_tau, p_prime)
    rhs = crossed + datum_norm
    ratio = math.inf if rhs == 0 else lhs / rhs
    return FPEnergyReport(lhs, crossed, datum_norm, ratio, sigma_prime, m_prime, p_prime)


def weak_form_defect(rho: SpaceTimeField, drift: np.ndarray, phi: SpaceTimeField) -> float:
    """Defect of the discrete weak formulation against a smooth test field.

    Computes -int <dr/dt, phi> + int (Drho . Dphi - b rho . Dphi) over Q_T,
    which vanishes for exact solutions of the backward template.
    """
    grid = rho.grid
    weights = _trapezoid_weights(grid)
    rho_t = time_derivative(rho).values
    drho = gradient_values(grid, rho.values)
    dphi = gradient_values(grid, phi.values)
    total = 0.0
    for j in range(grid.nt + 1):
        integrand = -rho_t[j] * phi.values[j]
        integrand = integrand + np.sum(drho[:, j] * dphi[:, j], axis=0)
        integrand = integrand - rho.values[j] * np.sum(drift[j] * dphi[:, j], axis=0)
        total += weights[j] * float(np.sum(integrand)) * grid.cell_volume
    return abs(total)
