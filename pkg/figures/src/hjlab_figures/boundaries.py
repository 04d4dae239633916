"""Closed-form threshold curves, re-implemented independently of the solver.

Only the formulas live here -- never the solvers.  Any disagreement with the
solver package's exponent book (checked through its CLI in the test suite) is
a build-breaking defect.
"""

from __future__ import annotations

import math

__all__ = ["hj_regularity_thresholds", "mfg_growth_thresholds"]


def hj_regularity_thresholds(gamma: float, d: int) -> dict:
    """Integrability thresholds for maximal regularity at growth gamma.

    q_crit_sub  = (d+2)(gamma-1)/gamma   (subquadratic branch)
    q_crit_super = (d+2)(gamma-1)/2      (superquadratic branch)
    q_threshold  = the active branch (they meet at gamma = 2).
    """
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    sub = (d + 2.0) * (gamma - 1.0) / gamma
    sup = (d + 2.0) * (gamma - 1.0) / 2.0
    return {
        "q_crit_sub": sub,
        "q_crit_super": sup,
        "q_threshold": sub if gamma < 2.0 else sup,
    }


def mfg_growth_thresholds(gamma: float, d: int) -> dict:
    """Coupling-growth caps for the coupled system at growth gamma.

    monotone: gamma' d / ((d-2)(d+2-gamma')) for gamma <= 2 (infinite when
    d <= 2, undefined at or below gamma = 1 + 1/(d+1)), 2/(d(gamma-1)-2) for
    gamma >= 2; focusing: gamma'/d for gamma <= 2, 2/((d+2)(gamma-1)-2) above.
    """
    if gamma <= 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    gc = gamma / (gamma - 1.0)
    if gamma <= 2.0:
        focusing = gc / d
        if d <= 2:
            monotone = math.inf
        elif gc >= d + 2.0:
            monotone = None
        else:
            monotone = gc * d / ((d - 2.0) * (d + 2.0 - gc))
    else:
        focusing = 2.0 / ((d + 2.0) * (gamma - 1.0) - 2.0)
        monotone = math.inf if d <= 2 else 2.0 / (d * (gamma - 1.0) - 2.0)
    return {"r_max_monotone": monotone, "r_max_focusing": focusing}
