"""hjlab: a desk-scale laboratory for viscous Hamilton-Jacobi regularity.

Solves periodic viscous Hamilton-Jacobi equations with power-growth
Hamiltonians and rough right-hand sides, the adjoint and forward
Fokker-Planck equations, and coupled forward-backward systems, and measures
the maximal-regularity, Hoelder, Lebesgue, stability and coupling estimates
as falsifiable numerical properties.
"""

__version__ = "0.1.0"

from .grid import Field, SpaceTimeField, TorusGrid, VectorField
from .hamiltonian import AssumptionCertificate, ExponentBook, HamiltonianSpec, verify_assumptions
from .hj import (
    BlowUpError,
    HJProblem,
    HJSolution,
    make_singular_f,
    manufacture_rhs,
    solve_hj,
    solve_regularized,
    truncate,
)
from .fp import FPProblem, FPSolution, PositivityError, solve_fp
from .mfg import Coupling, MFGProblem, MFGSolution, solve_mfg

__all__ = [
    "__version__",
    "TorusGrid",
    "Field",
    "VectorField",
    "SpaceTimeField",
    "HamiltonianSpec",
    "ExponentBook",
    "AssumptionCertificate",
    "verify_assumptions",
    "HJProblem",
    "HJSolution",
    "BlowUpError",
    "solve_hj",
    "solve_regularized",
    "truncate",
    "manufacture_rhs",
    "make_singular_f",
    "FPProblem",
    "FPSolution",
    "PositivityError",
    "solve_fp",
    "Coupling",
    "MFGProblem",
    "MFGSolution",
    "solve_mfg",
]
