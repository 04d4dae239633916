"""Self-contained property battery for the norm layer.

Runs the invariants the norm implementations promise (homogeneity, triangle
inequality, translation invariance, single-mode closed forms, interpolation
inequality boundedness) on deterministic random ensembles.  Used by the CLI
`verify-spaces` subcommand; the pytest suite exercises the same properties
with independent oracles at higher resolution.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import Field, TorusGrid
from .spaces import (
    check_gagliardo_nirenberg,
    check_miranda_nirenberg,
    check_nikolskii_embedding,
    holder_seminorm,
    lp_norm,
    nikolskii_seminorm,
    sobolev_slobodeckii_norm,
    theta_gagliardo_nirenberg,
    theta_miranda_nirenberg,
)
from .spectral import heat_mollify, random_trig_polynomial, shift

__all__ = ["verify_spaces"]


def _result(check: str, passed: bool, detail: str) -> dict:
    return {"check": check, "passed": bool(passed), "detail": detail}


def verify_spaces(seed: int = 0, n: int = 64, ensemble: int = 100) -> list[dict]:
    """Run the battery; returns one row per property."""
    if n < 32:
        raise ValueError(f"the battery draws mode-10 polynomials; need n >= 32, got {n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    grid = TorusGrid(1, n, 1.0, 1)
    out: list[dict] = []

    # homogeneity and triangle inequality on random pairs
    worst_tri = 0.0
    worst_hom = 0.0
    for _ in range(20):
        u = random_trig_polynomial(grid, max_mode=8, rng=rng)
        v = random_trig_polynomial(grid, max_mode=8, rng=rng)
        c = float(rng.uniform(-3, 3))
        for p in (1.0, 2.0, 3.5, math.inf):
            tri = lp_norm(Field(grid, u.values + v.values), p) - lp_norm(u, p) - lp_norm(v, p)
            worst_tri = max(worst_tri, tri)
            hom = abs(lp_norm(Field(grid, c * u.values), p) - abs(c) * lp_norm(u, p))
            worst_hom = max(worst_hom, hom)
        worst_hom = max(
            worst_hom,
            abs(holder_seminorm(Field(grid, c * u.values), 0.5) - abs(c) * holder_seminorm(u, 0.5)),
            abs(
                nikolskii_seminorm(Field(grid, c * u.values), 0.5, 2.0)
                - abs(c) * nikolskii_seminorm(u, 0.5, 2.0)
            ),
        )
    out.append(_result("triangle-inequality", worst_tri <= 1e-10, f"worst excess {worst_tri:.3e}"))
    out.append(_result("homogeneity", worst_hom <= 1e-10, f"worst defect {worst_hom:.3e}"))

    # translation invariance of L^p norms
    u = random_trig_polynomial(grid, max_mode=10, rng=rng)
    drift = abs(lp_norm(shift(u, (7 * grid.dx,)), 2.0) - lp_norm(u, 2.0))
    out.append(_result("shift-invariance", drift <= 1e-12, f"L2 drift {drift:.3e}"))

    # single-mode closed forms
    mode = Field.from_function(grid, lambda x: np.sin(2 * np.pi * x))
    err_l2 = abs(lp_norm(mode, 2.0) - 1.0 / math.sqrt(2.0))
    out.append(_result("single-mode-l2", err_l2 <= 1e-6, f"|L2 - 1/sqrt2| = {err_l2:.3e}"))
    cosm = Field.from_function(grid, lambda x: np.cos(2 * np.pi * x))
    semi = holder_seminorm(cosm, 1.0)
    out.append(_result(
        "single-mode-lipschitz", abs(semi - 2 * np.pi) / (2 * np.pi) <= 0.05,
        f"Lipschitz estimate {semi:.4f} vs 2 pi",
    ))

    # heat semigroup property
    s1, s2 = 0.013, 0.029
    semi_defect = float(np.max(np.abs(
        heat_mollify(u, s1 + s2).values - heat_mollify(heat_mollify(u, s1), s2).values
    )))
    out.append(_result("heat-semigroup", semi_defect <= 1e-12, f"defect {semi_defect:.3e}"))

    # Nikol'skii at large p approaches the Hoelder seminorm
    ratio = nikolskii_seminorm(cosm, 0.5, 64.0) / holder_seminorm(cosm, 0.5)
    out.append(_result(
        "nikolskii-large-p", 0.9 <= ratio <= 1.1, f"p=64 to Hoelder ratio {ratio:.4f}"
    ))

    # interpolation inequality ensembles; parameters keep theta in the valid
    # ranges [1/2, 1) and [(1-alpha)/(2-alpha), 1) respectively
    gamma, q, d = 1.5, 2.0, 1
    s = 4.0
    theta = theta_gagliardo_nirenberg(gamma, q, s, d)
    gn_ratios = []
    mn_ratios = []
    nik_ratios = []
    alpha = 0.5
    gamma_mn = 3.0
    theta_mn = theta_miranda_nirenberg(gamma_mn, q, alpha, d)
    for _ in range(ensemble):
        w = random_trig_polynomial(grid, max_mode=8, rng=rng, amplitude=float(rng.uniform(0.5, 2.0)))
        gn = check_gagliardo_nirenberg(w, gamma, q, s, theta)
        mn = check_miranda_nirenberg(w, gamma_mn, q, alpha, theta_mn)
        nik = check_nikolskii_embedding(w, 0.5, 1.5)
        if not gn.degenerate:
            gn_ratios.append(gn.ratio)
        if not mn.degenerate:
            mn_ratios.append(mn.ratio)
        if not nik.degenerate:
            nik_ratios.append(nik.ratio)
    for name, ratios in (
        ("gagliardo-nirenberg-ensemble", gn_ratios),
        ("miranda-nirenberg-ensemble", mn_ratios),
        ("nikolskii-embedding-ensemble", nik_ratios),
    ):
        finite = all(np.isfinite(r) for r in ratios)
        spread = max(ratios) / min(ratios) if ratios else math.inf
        out.append(_result(
            name, finite and len(ratios) == ensemble and spread < 50.0,
            f"{len(ratios)} ratios, max {max(ratios):.4f}, spread {spread:.2f}",
        ))

    # Slobodeckii monotonicity in s on a smooth field (mode-wise comparison)
    s_lo = sobolev_slobodeckii_norm(cosm, 0.3, 2.0)
    s_hi = sobolev_slobodeckii_norm(cosm, 0.7, 2.0)
    out.append(_result("slobodeckii-monotone", s_lo <= s_hi, f"{s_lo:.4f} <= {s_hi:.4f}"))

    return out
