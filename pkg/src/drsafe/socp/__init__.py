"""Cone programs and the interior-point solver.

Controller synthesis lives in :mod:`drsafe.socp.synthesis`; it is not imported
here because it depends on :mod:`drsafe.dro`, which itself builds programs.
"""

from .program import Cone, ConeKind, ConeProgram
from .solver import ConeSolution, SocpSolver, SolverOptions, Status, kkt_residuals, solve

__all__ = [
    "Cone",
    "ConeKind",
    "ConeProgram",
    "ConeSolution",
    "SocpSolver",
    "SolverOptions",
    "Status",
    "kkt_residuals",
    "solve",
]
