"""Forward-backward solver for the coupled HJ / Fokker-Planck system.

    -du/dt - Lap(u) + H(x,Du) = g(m),      u(T) = u_T,
     dm/dt - Lap(m) - div(D_pH(x,Du) m) = 0,   m(0) = m0,

with local power couplings g: monotone g(m) = C (m+)^r (plus a linear ramp
below zero, so transient lattice undershoots stay inside the domain of g) or
focusing g(m) = -C (m+)^r.  The iteration is damped fictitious play: solve the
backward equation against the current density, push the density through the
induced drift, then average.  The structural estimates are monitored on the
converged pair, never enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fp import FPProblem, PositivityError, solve_fp
from .grid import Field, SpaceTimeField, TorusGrid
from .hamiltonian import ExponentBook, HamiltonianSpec
from .hj import BlowUpError, HJProblem, solve_hj
from .lab import ExperimentRecord, _map_tasks, _prewarm
from .spaces import lp_norm, lq_spacetime_norm, _trapezoid_weights
from .spectral import divergence_values, forward, gradient_values, hessian_values

__all__ = [
    "Coupling",
    "spectral_tail_slope",
    "MFGProblem",
    "MFGSolution",
    "solve_mfg",
    "monitor_first_order",
    "monitor_second_order",
    "check_m_integrability",
    "check_gnct",
    "sweep_thresholds",
    "normalize_density",
]


@dataclass(frozen=True)
class Coupling:
    """Local power coupling g(m) with certified structure constants."""

    sign: str          # "monotone" (defocusing) or "focusing"
    r: float
    strength: float = 1.0

    def __post_init__(self):
        if self.sign not in ("monotone", "focusing"):
            raise ValueError(f"coupling sign must be monotone or focusing, got {self.sign!r}")
        if self.r <= 0:
            raise ValueError(f"coupling growth must be positive, got {self.r}")
        if self.strength < 0:
            raise ValueError(f"coupling strength must be >= 0, got {self.strength}")

    def g(self, m: np.ndarray) -> np.ndarray:
        pos = np.maximum(m, 0.0)
        body = self.strength * pos**self.r
        ramp = self.strength * np.minimum(m, 0.0)
        if self.sign == "monotone":
            return body + ramp
        return -body - ramp

    def g_prime(self, m: np.ndarray) -> np.ndarray:
        pos = np.maximum(m, 0.0)
        with np.errstate(divide="ignore"):
            slope = np.where(m > 0, self.strength * self.r * pos ** (self.r - 1.0), self.strength)
        return slope if self.sign == "monotone" else -slope

    @property
    def certified_constant(self) -> float:
        """C_g for which the power bounds on g (and g' when monotone) hold."""
        c = self.strength
        if c == 0:
            return 0.0
        return max(c * max(1.0, self.r), 1.0 / (c * self.r), 1.0 / c)

    def with_strength(self, strength: float) -> "Coupling":
        return Coupling(self.sign, self.r, strength)


def normalize_density(m0: Field) -> Field:
    """Rescale a nonnegative field to unit mass."""
    mass = m0.mean()
    if mass <= 0:
        raise ValueError("density must have positive mass")
    return Field(m0.grid, m0.values / mass)


def spectral_tail_slope(grid: TorusGrid, values: np.ndarray) -> float:
    """Exponential decay rate of shell maxima of the Fourier coefficients.

    The desk-scale smoothness surrogate: the fitted slope of log max_{|k|=s}
    |u_hat| against the shell index s over the resolved (dealiased) band.
    Strongly negative means an analytic-quality tail; near zero means the
    field is rough at the grid scale.
    """
    hat = forward(grid, values)
    mag = np.abs(hat) / values.size
    shell = np.zeros(grid.spectral_shape)
    for f in grid.freq:
        shell = np.maximum(shell, np.abs(f))
    cut = int(grid.n // 3)
    idx = np.arange(1, cut + 1)
    peaks = np.array([float(mag[shell == s].max(initial=0.0)) for s in idx])
    good = peaks > 1e-300
    if good.sum() < 3:
        return -math.inf
    return float(np.polyfit(idx[good], np.log(peaks[good]), 1)[0])


@dataclass(frozen=True)
class MFGProblem:
    grid: TorusGrid
    spec: HamiltonianSpec
    coupling: Coupling
    m0: Field
    uT: Field

    def __post_init__(self):
        if self.m0.min() < 0:
            raise ValueError(f"initial density must be nonnegative, min = {self.m0.min()}")
        if abs(self.m0.mean() - 1.0) > 1e-12:
            raise ValueError(f"initial density must have unit mass, got {self.m0.mean()}")
        for f in (self.m0, self.uT):
            if f.grid.shape != self.grid.shape:
                raise ValueError("problem fields live on different grids")

    def book(self, q: float | None = None) -> ExponentBook:
        return ExponentBook(self.grid.d, self.spec.gamma, q, self.coupling.r)


@dataclass
class MFGSolution:
    """Fixed-point output; partial (converged=False) on stagnation or blow-up."""

    u: SpaceTimeField | None
    m: SpaceTimeField
    residuals: list[float]
    converged: bool
    iterations: int
    blew_up: bool = False
    diagnosis: str = ""
    delta_final: float = 0.0
    min_density: float = 0.0

    @property
    def residual_trend(self) -> float:
        """Log-slope of the residual over the last 10 iterations (negative = decay)."""
        tail = [r for r in self.residuals[-10:] if r > 0]
        if len(tail) < 3:
            return -math.inf
        return float(np.polyfit(np.arange(len(tail)), np.log(tail), 1)[0])

    def smoothness_surrogate(self) -> dict:
        """Spectral tail slopes of the final u and m slices (smoothness proxy)."""
        out = {}
        grid = self.m.grid
        if self.u is not None:
            out["u_tail_slope"] = spectral_tail_slope(grid, self.u.values[0])
        out["m_tail_slope"] = spectral_tail_slope(grid, self.m.values[-1])
        return out


def _density_drift(spec: HamiltonianSpec, u: SpaceTimeField) -> np.ndarray:
    """Transport drift slices D_pH(x, Du) for the forward equation."""
    grid = u.grid
    du = gradient_values(grid, u.values)
    out = np.empty((grid.nt + 1, grid.d) + grid.shape)
    for j in range(grid.nt + 1):
        out[j] = spec.dp_hamiltonian(du[:, j])
    return out


def _backward_hj(problem: MFGProblem, m_values: np.ndarray, nt: int) -> SpaceTimeField:
    """Solve the backward equation against the frozen density, in reversed time."""
    grid = problem.grid
    g_rev = np.ascontiguousarray(problem.coupling.g(m_values)[::-1])
    f_rev = SpaceTimeField(grid, g_rev)
    sol = solve_hj(HJProblem(grid, problem.spec, f_rev, problem.uT), nt)
    return sol.u.reversed()


def solve_mfg(
    problem: MFGProblem,
    nt: int | None = None,
    *,
    delta: float = 0.5,
    max_iters: int = 200,
    tol: float = 1e-6,
    m_init: SpaceTimeField | None = None,
) -> MFGSolution:
    """Damped fictitious play until ||m_new - m_old||_{L^1(Q_T)} < tol.

    The damping factor halves when the residual rises on two consecutive
    iterations.  Inner blow-ups are recorded in the returned solution (the
    expected signal above the focusing threshold), not raised.
    """
    if not (0 < delta <= 1):
        raise ValueError(f"damping must lie in (0, 1], got {delta}")
    grid = problem.grid
    if nt is None:
        nt = grid.nt
    if nt != grid.nt:
        grid = grid.with_time(grid.T, nt)
        problem = MFGProblem(
            grid,
            problem.spec,
            problem.coupling,
            problem.m0,
            problem.uT,
        )
    if m_init is None:
        m_vals = np.broadcast_to(problem.m0.values, (nt + 1,) + grid.shape).copy()
    else:
        if len(m_init) != nt + 1:
            raise ValueError("initial density guess has the wrong slice count")
        m_vals = m_init.values.copy()

    residuals: list[float] = []
    rises = 0
    d_cur = delta
    u_field: SpaceTimeField | None = None
    min_density = float(m_vals.min())
    for it in range(1, max_iters + 1):
        try:
            u_field = _backward_hj(problem, m_vals, nt)
            drift = _density_drift(problem.spec, u_field)
            fp = solve_fp(
                FPProblem(grid, drift, problem.m0, "forward", positivity_tol=1e-3),
                nt,
                check_positivity=True,
            )
        except BlowUpError as exc:
            return MFGSolution(
                u_field, SpaceTimeField(grid, m_vals), residuals, False, it,
                blew_up=True, diagnosis=f"value-function blow-up: {exc}",
                delta_final=d_cur, min_density=min_density,
            )
        except PositivityError as exc:
            return MFGSolution(
                u_field, SpaceTimeField(grid, m_vals), residuals, False, it,
                blew_up=True, diagnosis=f"density positivity failure: {exc}",
                delta_final=d_cur, min_density=min_density,
            )
        m_tilde = fp.rho.values
        min_density = min(min_density, float(m_tilde.min()))
        diff = SpaceTimeField(grid, np.abs(m_tilde - m_vals))
        res = d_cur * lq_spacetime_norm(diff, 1.0)
        m_vals = (1.0 - d_cur) * m_vals + d_cur * m_tilde
        residuals.append(res)
        if len(residuals) >= 2 and res > residuals[-2]:
            rises += 1
            if rises >= 2:
                d_cur = max(d_cur / 2.0, 0.05)
                rises = 0
        else:
            rises = 0
        if res < tol:
            u_field = _backward_hj(problem, m_vals, nt)
            return MFGSolution(
                u_field, SpaceTimeField(grid, m_vals), residuals, True, it,
                delta_final=d_cur, min_density=min_density,
            )
    return MFGSolution(
        u_field, SpaceTimeField(grid, m_vals), residuals, False, max_iters,
        diagnosis="fixed point did not reach tolerance", delta_final=d_cur,
        min_density=min_density,
    )


# -- structural monitors -------------------------------------------------------


@dataclass(frozen=True)
class FirstOrderReport:
    kinetic: float          # iint |Du|^gamma m
    coupling_power: float   # iint m^{r+1}
    identity_defect: float  # relative defect of the testing identity


def monitor_first_order(sol: MFGSolution, problem: MFGProblem) -> FirstOrderReport:
    """Energy integrals from testing the two equations against each other.

    The discrete identity checked is
        int m0 u(0) - int m(T) u_T = iint L(x, D_pH(x,Du)) m + iint g(m) m.
    """
    grid = sol.m.grid
    weights = _trapezoid_weights(grid)
    cell = grid.cell_volume
    u, m = sol.u, sol.m
    du = gradient_values(grid, u.values)
    kinetic = 0.0
    lagr = 0.0
    gm = 0.0
    power = 0.0
    rp1 = problem.coupling.r + 1.0
    for j in range(grid.nt + 1):
        mag = np.sqrt(np.sum(du[:, j] ** 2, axis=0))
        mj = m.values[j]
        kinetic += weights[j] * float(np.sum(mag**problem.spec.gamma * mj)) * cell
        dph = problem.spec.dp_hamiltonian(du[:, j])
        lagr += weights[j] * float(np.sum(problem.spec.lagrangian(dph) * mj)) * cell
        gm += weights[j] * float(np.sum(problem.coupling.g(mj) * mj)) * cell
        power += weights[j] * float(np.sum(np.maximum(mj, 0.0) ** rp1)) * cell
    lhs = float(np.sum(problem.m0.values * u.values[0])) * cell - float(
        np.sum(m.values[-1] * problem.uT.values)
    ) * cell
    rhs = lagr + gm
    scale = max(abs(lhs), abs(rhs), abs(lagr), abs(gm), 1e-30)
    return FirstOrderReport(kinetic, power, abs(lhs - rhs) / scale)


@dataclass(frozen=True)
class SecondOrderReport:
    weighted_hessian: float   # iint (1+|Du|^2)^{(gamma-2)/2} |D^2 u|^2 m
    density_gradient: float   # iint |D(m^{(r+1)/2})|^2


def monitor_second_order(sol: MFGSolution, problem: MFGProblem) -> SecondOrderReport:
    grid = sol.m.grid
    weights = _trapezoid_weights(grid)
    cell = grid.cell_volume
    gamma = problem.spec.gamma
    rp = (problem.coupling.r + 1.0) / 2.0
    du = gradient_values(grid, sol.u.values)
    hess = hessian_values(grid, sol.u.values)
    mpow = np.maximum(sol.m.values, 0.0) ** rp
    dm = gradient_values(grid, mpow)
    wh = 0.0
    dg = 0.0
    for j in range(grid.nt + 1):
        mag2 = np.sum(du[:, j] ** 2, axis=0)
        h2 = np.sum(hess[:, :, j] ** 2, axis=(0, 1))
        wh += weights[j] * float(
            np.sum((1.0 + mag2) ** ((gamma - 2.0) / 2.0) * h2 * sol.m.values[j])
        ) * cell
        dg += weights[j] * float(np.sum(np.sum(dm[:, j] ** 2, axis=0))) * cell
    return SecondOrderReport(wh, dg)


@dataclass(frozen=True)
class IntegrabilityReport:
    hypothesis: float   # the drift functional K
    sup_lp: float       # sup_t ||m(t)||_p
    datum_lp: float     # ||m0||_p
    ratio: float
    p: float
    mu: float


def check_m_integrability(
    sol: MFGSolution, problem: MFGProblem, mu: float, p: float | None = None
) -> IntegrabilityReport:
    """Hypothesis functional and density integrability gain of the drift bound.

    K = (iint |div b|^2 (1+|b|)^{(2-mu)/(mu-1)} m)^{1/2}
        * (iint |b|^{mu/(mu-1)} m)^{(mu-2)/(2 mu)},   b = -D_pH(x,Du);
    p defaults to d(mu-1)/(d(mu-1)-2) for d > 2 and must be supplied otherwise.
    """
    if mu < 2:
        raise ValueError(f"mu must be >= 2, got {mu}")
    grid = sol.m.grid
    d = grid.d
    if p is None:
        if d <= 2:
            raise ValueError("for d <= 2 the integrability exponent p must be configured")
        p = d * (mu - 1.0) / (d * (mu - 1.0) - 2.0)
    weights = _trapezoid_weights(grid)
    cell = grid.cell_volume
    drift = -_density_drift(problem.spec, sol.u)
    int_div = 0.0
    int_b = 0.0
    for j in range(grid.nt + 1):
        b = drift[j]
        divb = divergence_values(grid, b)
        mag = np.sqrt(np.sum(b**2, axis=0))
        mj = np.maximum(sol.m.values[j], 0.0)
        int_div += weights[j] * float(
            np.sum(divb**2 * (1.0 + mag) ** ((2.0 - mu) / (mu - 1.0)) * mj)
        ) * cell
        int_b += weights[j] * float(np.sum(mag ** (mu / (mu - 1.0)) * mj)) * cell
    k_val = math.sqrt(int_div) * int_b ** ((mu - 2.0) / (2.0 * mu)) if int_b > 0 or mu == 2 else 0.0
    if mu == 2:
        k_val = math.sqrt(int_div)
    sup_lp = max(lp_norm(sol.m.slice(j), p) for j in range(grid.nt + 1))
    datum_lp = lp_norm(problem.m0, p)
    ratio = (sup_lp - datum_lp) / max(k_val, 1e-12)
    return IntegrabilityReport(k_val, sup_lp, datum_lp, ratio, p, mu)


@dataclass(frozen=True)
class GnctReport:
    """Log-log slope of iint m^{r+1} against iint |D_pH(Du)|^{gamma'} + 1."""

    amplitudes: list[float]
    lhs_values: list[float]
    rhs_values: list[float]
    delta_hat: float
    r: float
    r_max: float
    below_threshold: bool
    all_converged: bool


def check_gnct(
    problem: MFGProblem,
    amplitudes: list[float],
    nt: int | None = None,
    **solve_kw,
) -> GnctReport:
    """Fit the coupling/drift exponent across a terminal-cost amplitude ladder.

    Scaling the terminal cost drives both sides of the inequality over a wide
    range; the log-log slope of iint m^{r+1} against iint |D_pH|^{gamma'} + 1
    is the measured exponent, below one inside the admissible growth range.
    """
    book = problem.book()
    r_max = book.r_max_focusing
    lhs_vals: list[float] = []
    rhs_vals: list[float] = []
    all_ok = True
    gamma_c = problem.spec.gamma_conj
    for c in amplitudes:
        prob = MFGProblem(
            problem.grid, problem.spec, problem.coupling,
            problem.m0, Field(problem.grid, c * problem.uT.values),
        )
        sol = solve_mfg(prob, nt, **solve_kw)
        if not sol.converged:
            all_ok = False
            continue
        grid = sol.m.grid
        weights = _trapezoid_weights(grid)
        cell = grid.cell_volume
        du = gradient_values(grid, sol.u.values)
        lhs = 0.0
        rhs = 1.0
        rp1 = prob.coupling.r + 1.0
        for j in range(grid.nt + 1):
            dph = prob.spec.dp_hamiltonian(du[:, j])
            mag = np.sqrt(np.sum(dph**2, axis=0))
            rhs += weights[j] * float(np.sum(mag**gamma_c)) * cell
            lhs += weights[j] * float(np.sum(np.maximum(sol.m.values[j], 0.0) ** rp1)) * cell
        lhs_vals.append(lhs)
        rhs_vals.append(rhs)
    if len(lhs_vals) >= 2 and np.ptp(np.log(rhs_vals)) > 0:
        delta_hat = float(np.polyfit(np.log(rhs_vals), np.log(lhs_vals), 1)[0])
    else:
        delta_hat = math.nan
    return GnctReport(
        list(amplitudes), lhs_vals, rhs_vals, delta_hat,
        problem.coupling.r, r_max, problem.coupling.r < r_max, all_ok,
    )


def sweep_thresholds(
    gamma: float,
    d: int,
    r_values: list[float],
    sign: str,
    *,
    n: int = 32,
    T: float = 0.25,
    strength: float = 1.0,
    delta: float = 0.5,
    max_iters: int = 150,
    tol: float = 1e-5,
    workers: int = 1,
) -> ExperimentRecord:
    """Run the fixed point across a growth-exponent grid straddling the threshold.

    Convergence is asserted only strictly below the monotone threshold; the
    focusing branch above threshold is recorded without a verdict (existence
    may still hold for small horizons).
    """
    nt = int(math.ceil(T * n * n))
    grid = TorusGrid(d, n, T, nt)
    spec = HamiltonianSpec.isotropic(grid, gamma)
    bump = 1.0 + 0.5 * np.cos(2.0 * np.pi * grid.x[0]) * np.ones(grid.shape)
    m0 = normalize_density(Field(grid, bump))
    uT = Field(grid, 0.2 * np.cos(2.0 * np.pi * grid.x[0]) * np.ones(grid.shape))
    record = ExperimentRecord("mfg-sweep", ExponentBook(d, gamma), {
        "gamma": gamma, "d": d, "sign": sign, "n": n, "T": T,
        "strength": strength, "r_values": list(r_values),
    })
    book = ExponentBook(d, gamma)
    r_max = book.r_max_monotone if sign == "monotone" else book.r_max_focusing

    def one_cell(r):
        problem = MFGProblem(grid, spec, Coupling(sign, r, strength), m0, uT)
        sol = solve_mfg(problem, nt, delta=delta, max_iters=max_iters, tol=tol)
        below = r_max is None or r < r_max
        return {
            "gamma": gamma, "d": d, "r": r, "sign": sign,
            "r_max": math.inf if r_max is None else r_max,
            "below_threshold": below,
            "converged": sol.converged, "blew_up": sol.blew_up,
            "iterations": sol.iterations,
            "final_residual": sol.residuals[-1] if sol.residuals else math.nan,
        }

    _prewarm(grid)
    ok = True
    for row in _map_tasks(one_cell, list(r_values), workers):
        record.rows.append(row)
        if sign == "monotone" and row["below_threshold"] and not row["converged"]:
            ok = False
    record.verdicts = {"all_below_threshold_converged": ok}
    return record
