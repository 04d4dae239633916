"""Model Hamiltonian family H(x,p) = h(x)|p|^gamma + b(x).p.

The family ships with its gradient D_pH, the closed-form Legendre transform
L(x,nu) = c_gamma h^{1-gamma'} |nu - b|^{gamma'},   c_gamma = (gamma-1) gamma^{-gamma'},
and sampled certificates for the structural growth/convexity assumptions.
ExponentBook collects every threshold the regularity experiments test against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Field, TorusGrid, VectorField
from .spectral import shift_values, wrapped_distance

__all__ = ["HamiltonianSpec", "ExponentBook", "AssumptionCertificate", "verify_assumptions"]


@dataclass(frozen=True)
class HamiltonianSpec:
    """Coefficients (gamma, h, b) plus a certified growth constant.

    h must be bounded away from zero; gamma must exceed 1.  The structure
    constant certifies the two-sided power growth of H on a sample lattice of
    gradient values (see `verify_assumptions` for the full certificate).
    """

    gamma: float
    h: Field
    b: VectorField
    structure_constant: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 1 and np.isfinite(self.gamma)):
            raise ValueError(f"growth exponent must satisfy gamma > 1, got {self.gamma}")
        if self.h.min() <= 0:
            raise ValueError(f"h must be strictly positive, min h = {self.h.min()}")
        if self.b.grid.shape != self.h.grid.shape:
            raise ValueError("h and b live on different grids")
        if self.structure_constant == 0.0:
            object.__setattr__(self, "structure_constant", self._certify_growth())

    # -- constructors --------------------------------------------------------

    @classmethod
    def isotropic(cls, grid: TorusGrid, gamma: float, h0: float = 1.0) -> "HamiltonianSpec":
        """x-independent model: H = h0 |p|^gamma."""
        return cls(gamma, Field.constant(grid, h0), VectorField.zero(grid))

    @classmethod
    def cosine(
        cls,
        grid: TorusGrid,
        gamma: float,
        h0: float = 1.0,
        variation: float = 0.0,
        drift: float = 0.0,
    ) -> "HamiltonianSpec":
        """h(x) = h0 (1 + variation cos(2 pi x_1)), b = (drift, 0, ...)."""
        if not (abs(variation) < 1):
            raise ValueError("need |variation| < 1 to keep h positive")
        hvals = h0 * (1.0 + variation * np.cos(2.0 * np.pi * grid.x[0]))
        h = Field(grid, np.broadcast_to(hvals, grid.shape))
        bvals = np.zeros((grid.d,) + grid.shape)
        bvals[0] = drift
        return cls(gamma, h, VectorField(grid, bvals))

    # -- derived exponents -----------------------------------------------------

    @property
    def grid(self) -> TorusGrid:
        return self.h.grid

    @property
    def gamma_conj(self) -> float:
        return self.gamma / (self.gamma - 1.0)

    @property
    def legendre_coefficient(self) -> float:
        return (self.gamma - 1.0) * self.gamma ** (-self.gamma_conj)

    # -- field evaluations (arrays shaped (d, ..., n, ..., n)) -----------------

    def hamiltonian(self, p: np.ndarray) -> np.ndarray:
        """H(x,p) for a gradient stack p with leading component axis."""
        mag = np.sqrt(np.sum(p**2, axis=0))
        drift = np.sum(self.b.values * p, axis=0)
        return self.h.values * mag**self.gamma + drift

    def dp_hamiltonian(self, p: np.ndarray) -> np.ndarray:
        """D_pH(x,p) = gamma h |p|^{gamma-2} p + b, continuously extended at p=0."""
        mag = np.sqrt(np.sum(p**2, axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(mag > 0.0, mag ** (self.gamma - 2.0), 0.0)
        return self.gamma * self.h.values * radial * p + self.b.values

    def lagrangian(self, nu: np.ndarray, h: np.ndarray | None = None, b: np.ndarray | None = None) -> np.ndarray:
        """Legendre transform L(x,nu); optional coefficient overrides for shifts."""
        hv = self.h.values if h is None else h
        bv = self.b.values if b is None else b
        mag = np.sqrt(np.sum((nu - bv) ** 2, axis=0))
        return self.legendre_coefficient * hv ** (1.0 - self.gamma_conj) * mag**self.gamma_conj

    def shifted_coefficients(self, cells: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """(h(x+xi), b(x+xi)) sampled on the lattice, xi = -cells*dx rolls."""
        neg = [-c for c in cells]
        return (
            shift_values(self.grid, self.h.values, neg),
            shift_values(self.grid, self.b.values, neg),
        )

    # -- point evaluations -----------------------------------------------------

    def evaluate_H(self, x_index: tuple[int, ...], p: Sequence[float]) -> float:
        pv = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(pv)):
            raise ValueError("gradient argument must be finite")
        hx = float(self.h.values[x_index])
        bx = self.b.values[(slice(None),) + tuple(x_index)]
        return hx * float(np.linalg.norm(pv)) ** self.gamma + float(np.dot(bx, pv))

    def evaluate_DpH(self, x_index: tuple[int, ...], p: Sequence[float]) -> np.ndarray:
        pv = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(pv)):
            raise ValueError("gradient argument must be finite")
        hx = float(self.h.values[x_index])
        bx = np.asarray(self.b.values[(slice(None),) + tuple(x_index)])
        mag = float(np.linalg.norm(pv))
        if mag == 0.0:
            return bx.copy()
        return self.gamma * hx * mag ** (self.gamma - 2.0) * pv + bx

    def legendre_transform(self, x_index: tuple[int, ...], nu: Sequence[float]) -> float:
        nv = np.asarray(nu, dtype=float)
        if not np.all(np.isfinite(nv)):
            raise ValueError("velocity argument must be finite")
        hx = float(self.h.values[x_index])
        bx = np.asarray(self.b.values[(slice(None),) + tuple(x_index)])
        mag = float(np.linalg.norm(nv - bx))
        return self.legendre_coefficient * hx ** (1.0 - self.gamma_conj) * mag**self.gamma_conj

    def to_dict(self) -> dict:
        """JSON-ready payload: exponent, coefficient lattices, constants."""
        return {
            "gamma": self.gamma,
            "h": self.h.values.tolist(),
            "b": self.b.values.tolist(),
            "structure_constant": self.structure_constant,
            "legendre_coefficient": self.legendre_coefficient,
        }

    # -- growth certificate ------------------------------------------------------

    def _sample_magnitudes(self) -> np.ndarray:
        return np.concatenate(([0.0], np.logspace(-3, 1.5, 28)))

    def _certify_growth(self) -> float:
        """Constant C with C^-1 |p|^gamma - C <= H <= C(|p|^gamma + 1) everywhere.

        Certified over the coefficient extremes on a dense magnitude lattice,
        including the |p| -> infinity requirements (hmax above, 1/hmin below),
        with a hair of headroom against lattice gaps.
        """
        hmin, hmax = self.h.min(), self.h.max()
        bmax = float(np.max(np.sqrt(np.sum(self.b.values**2, axis=0))))
        mags = np.concatenate(([0.0], np.logspace(-4, 3, 4000)))
        power = mags**self.gamma
        upper = hmax * power + bmax * mags   # worst-case H at |p| = mag
        lower = hmin * power - bmax * mags   # best lower envelope of H
        c = max(1.0, hmax, 1.0 / hmin)
        c = max(c, float(np.max(upper / (power + 1.0))))
        # lower bound needs C^2 + H C - |p|^gamma >= 0 at the smallest H
        c = max(c, float(np.max(0.5 * (-lower + np.sqrt(lower**2 + 4.0 * power)))))
        return float(c) * (1.0 + 1e-9)


@dataclass(frozen=True)
class AssumptionCertificate:
    """Best sampled constants for the structural assumptions, or a violation."""

    growth_constant: float          # two-sided power growth of H
    shift_constant: float           # x-increment bound against |D_pH|^gamma' + 1
    convexity_constant: float       # lower bound in Tr(D^2_pp H M^2)
    lagrangian_constant: float      # two-sided power growth of L
    alpha: float
    samples: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_assumptions(spec: HamiltonianSpec, alpha: float) -> AssumptionCertificate:
    """Evaluate the structural inequalities over a sample lattice.

    Returns the smallest admissible constants found; a violation is recorded
    when no finite constant works (e.g. non-positive convexity samples).
    """
    grid = spec.grid
    gamma, gamma_c = spec.gamma, spec.gamma_conj
    violations: list[str] = []

    mags = spec._sample_magnitudes()
    dirs = _directions(grid.d)
    pset = np.array([m * e for m in mags for e in dirs])  # (N, d)

    # (H) growth: certified at construction over coefficient extremes
    growth = spec.structure_constant

    # (H_alpha): H(x,p) - H(x+xi,p) <= C |xi|^alpha (|D_pH(x,p)|^gamma' + 1)
    shift_c = 0.0
    offsets = _sample_offsets(grid)
    hv, bv = spec.h.values, spec.b.values
    for cells in offsets:
        dist = wrapped_distance(grid, cells)
        h_s, b_s = spec.shifted_coefficients(cells)
        dh = hv - h_s                      # h(x) - h(x+xi)
        db = bv - b_s
        for p in pset:
            mag = float(np.linalg.norm(p))
            lhs = dh * mag**gamma + np.tensordot(p, db, axes=(0, 0))
            dph = spec.dp_hamiltonian(np.broadcast_to(p.reshape((-1,) + (1,) * grid.d), (grid.d,) + grid.shape))
            denom = dist**alpha * (np.sum(dph**2, axis=0) ** (gamma_c / 2.0) + 1.0)
            shift_c = max(shift_c, float(np.max(lhs / denom)))

    # (H2): Tr(D^2_pp H M^2) >= c (1+|p|^2)^{(gamma-2)/2} |M|^2 over p != 0
    conv = math.inf
    h_min = spec.h.min()
    for p in pset:
        mag = float(np.linalg.norm(p))
        if mag == 0.0:
            continue
        for m_frob2, mp2 in _matrix_samples(grid.d, p):
            lhs = gamma * h_min * (mag ** (gamma - 2.0) * m_frob2 + (gamma - 2.0) * mag ** (gamma - 4.0) * mp2)
            weight = (1.0 + mag**2) ** ((gamma - 2.0) / 2.0) * m_frob2
            conv = min(conv, lhs / weight)
    if conv <= 0:
        violations.append(f"convexity lower bound non-positive: {conv}")

    # (L1): two-sided power growth of the Lagrangian
    hmin, hmax = spec.h.min(), spec.h.max()
    bmax = float(np.max(np.sqrt(np.sum(bv**2, axis=0))))
    coef = spec.legendre_coefficient
    nus = np.concatenate(([0.0], np.logspace(-4, 3, 4000)))
    power_nu = nus**gamma_c
    upper_l = coef * hmin ** (1.0 - gamma_c) * (nus + bmax) ** gamma_c
    lower_l = coef * hmax ** (1.0 - gamma_c) * np.maximum(nus - bmax, 0.0) ** gamma_c
    lag_c = max(1.0, coef * hmin ** (1.0 - gamma_c), 1.0 / (coef * hmax ** (1.0 - gamma_c)))
    lag_c = max(lag_c, float(np.max(upper_l / (power_nu + 1.0))))
    lag_c = max(lag_c, float(np.max(0.5 * (-lower_l + np.sqrt(lower_l**2 + 4.0 * power_nu)))))
    lag_c = lag_c * (1.0 + 1e-9)

    return AssumptionCertificate(
        growth_constant=growth,
        shift_constant=shift_c,
        convexity_constant=conv,
        lagrangian_constant=lag_c,
        alpha=alpha,
        samples={
            "p_magnitudes": len(mags),
            "p_directions": len(dirs),
            "offsets": len(offsets),
            "x_points": int(np.prod(grid.shape)),
        },
        violations=violations,
    )


def _directions(d: int) -> list[np.ndarray]:
    dirs = [np.eye(d)[j] for j in range(d)]
    if d >= 2:
        dirs.append(np.ones(d) / math.sqrt(d))
        dirs.append(np.array([1.0, -1.0] + [0.0] * (d - 2)) / math.sqrt(2.0))
    else:
        dirs.append(np.array([-1.0]))
    return dirs


def _sample_offsets(grid: TorusGrid) -> list[tuple[int, ...]]:
    steps = sorted({1, 2, grid.n // 8, grid.n // 4, grid.n // 2})
    offsets = []
    for s in steps:
        if s < 1:
            continue
        for axis in range(grid.d):
            cells = [0] * grid.d
            cells[axis] = s
            offsets.append(tuple(cells))
    return offsets


def _matrix_samples(d: int, p: np.ndarray) -> list[tuple[float, float]]:
    """(|M|_F^2, |Mp|^2) for a small set of symmetric matrices."""
    mats = [np.eye(d)]
    if d >= 2:
        m = np.zeros((d, d))
        m[0, 1] = m[1, 0] = 1.0
        mats.append(m)
        mats.append(np.diag([1.0] + [-1.0] * (d - 1)))
    out = []
    for m in mats:
        out.append((float(np.sum(m**2)), float(np.sum((m @ p) ** 2))))
    return out


_INF = math.inf


@dataclass(frozen=True)
class ExponentBook:
    """Every exponent and threshold the experiments test, from (d, gamma, q, r).

    Derived quantities are exact arithmetic in the inputs; None marks a
    quantity whose defining formula does not apply at this parameter point.
    """

    d: int
    gamma: float
    q: float | None = None
    r: float | None = None
    alpha_fallback: float = 0.9     # choice for the regime with no formula

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1-3, got {self.d}")
        if not (self.gamma > 1):
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.q is not None and self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.r is not None and self.r <= 0:
            raise ValueError(f"coupling growth must be positive, got {self.r}")

    # -- conjugates and regularity thresholds -----------------------------------

    @property
    def gamma_conj(self) -> float:
        return self.gamma / (self.gamma - 1.0)

    @property
    def q_crit_sub(self) -> float:
        """(d+2)(gamma-1)/gamma = (d+2)/gamma', the subquadratic threshold."""
        return (self.d + 2.0) * (self.gamma - 1.0) / self.gamma

    @property
    def q_crit_super(self) -> float:
        """(d+2)(gamma-1)/2, the superquadratic threshold."""
        return (self.d + 2.0) * (self.gamma - 1.0) / 2.0

    @property
    def q_threshold(self) -> float:
        """Maximal-regularity threshold for this gamma (branches meet at gamma=2)."""
        return self.q_crit_sub if self.gamma < 2.0 else self.q_crit_super

    @property
    def gamma_lower_subquadratic(self) -> float:
        """Smallest gamma the subquadratic regularity branch covers: 1 + 2/(d+2)."""
        return 1.0 + 2.0 / (self.d + 2.0)

    @property
    def gamma_lower_mfg(self) -> float:
        """Smallest gamma the coupled-system results cover: 1 + 1/(d+1)."""
        return 1.0 + 1.0 / (self.d + 1.0)

    # -- duality exponents ---------------------------------------------------------

    @property
    def p_dual(self) -> float:
        """d q / ((d+2) - 2q) when q < (d+2)/2, else infinity."""
        if self.q is None:
            raise ValueError("p_dual needs q")
        if self.q > (self.d + 2.0) / 2.0:
            return _INF
        if self.q == (self.d + 2.0) / 2.0:
            return _INF
        return self.d * self.q / ((self.d + 2.0) - 2.0 * self.q)

    def m_prime(self, sigma: float) -> float:
        """Crossed-integral exponent 1 + (d+2)/sigma."""
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return 1.0 + (self.d + 2.0) / sigma

    # -- Hoelder exponent ------------------------------------------------------------

    @property
    def alpha_formula_limit(self) -> float:
        """Upper end of the q-range where the explicit exponent formula applies."""
        return (self.d + 2.0) / (self.gamma_conj - 1.0)

    @property
    def alpha_is_formula(self) -> bool:
        if self.q is None:
            return False
        return (self.d + 2.0) / self.gamma_conj < self.q < self.alpha_formula_limit

    @property
    def alpha_pred(self) -> float | None:
        """Predicted uniform Hoelder exponent, in (0,1) whenever emitted."""
        if self.q is None or self.q <= (self.d + 2.0) / self.gamma_conj:
            return None
        if self.alpha_is_formula:
            return self.gamma_conj - (self.d + 2.0) / self.q
        return self.alpha_fallback

    # -- coupled-system growth thresholds ----------------------------------------------

    @property
    def r_max_monotone(self) -> float | None:
        """Monotone-coupling growth cap; infinite when d <= 2.

        None when gamma <= 1 + 1/(d+1), where the covered range ends.
        """
        if self.d <= 2:
            return _INF
        if self.gamma <= 2.0:
            gc = self.gamma_conj
            if gc >= self.d + 2.0:
                return None
            return gc * self.d / ((self.d - 2.0) * (self.d + 2.0 - gc))
        return 2.0 / (self.d * (self.gamma - 1.0) - 2.0)

    @property
    def r_max_focusing(self) -> float:
        """Focusing-coupling growth cap."""
        if self.gamma <= 2.0:
            return self.gamma_conj / self.d
        return 2.0 / ((self.d + 2.0) * (self.gamma - 1.0) - 2.0)

    # -- serialization -------------------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "gamma": self.gamma,
            "q": self.q,
            "r": self.r,
            "gamma_conj": self.gamma_conj,
            "q_crit_sub": self.q_crit_sub,
            "q_crit_super": self.q_crit_super,
            "q_threshold": self.q_threshold,
            "gamma_lower_subquadratic": self.gamma_lower_subquadratic,
            "gamma_lower_mfg": self.gamma_lower_mfg,
            "r_max_monotone": self.r_max_monotone,
            "r_max_focusing": self.r_max_focusing,
        }
        if self.q is not None:
            out["p_dual"] = self.p_dual
            out["alpha_pred"] = self.alpha_pred
            out["alpha_is_formula"] = self.alpha_is_formula
        return out
