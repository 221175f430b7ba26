"""Controller synthesis: the min-norm DRO program solved in either cone form."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..dro import SynthesisProblem, assemble_epigraph_socp, assemble_reduced_socp
from .program import ConeProgram
from .solver import ConeSolution, SocpSolver, SolverOptions, Status


class Form(str, Enum):
    EPIGRAPH = "epigraph"
    REDUCED = "reduced"


@dataclass
class ControlResult:
    status: Status
    u: np.ndarray | None
    objective: float
    form: Form
    program: ConeProgram
    solution: ConeSolution

    @property
    def feasible(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def wall_time(self) -> float:
        return self.solution.wall_time


def build_program(p: SynthesisProblem, x=None, form: Form | str = Form.REDUCED, margin: float = 0.0,
                  objective_scale: float = 1.0) -> ConeProgram:
    form = Form(form)
    if form is Form.EPIGRAPH:
        if margin:
            raise ValueError("margin tightening is only defined for the reduced form")
        return assemble_epigraph_socp(p, x, objective_scale=objective_scale)
    return assemble_reduced_socp(p, x, margin=margin, objective_scale=objective_scale)


def synthesize(
    p: SynthesisProblem,
    x=None,
    form: Form | str = Form.REDUCED,
    options: SolverOptions | None = None,
    margin: float = 0.0,
) -> ControlResult:
    """Closest control to the nominal one satisfying all DRO constraints at ``x``.

    Raises EpsTooLarge when ``eps > 1/N``. Infeasibility is reported through
    ``status`` with the dual certificate on ``solution.certificate``.
    """
    form = Form(form)
    prog = build_program(p, x, form, margin)
    solver = SocpSolver(options)
    sol = solver.solve(prog)
    m = p.constraints_at(x)[0].m
    if sol.status is not Status.OPTIMAL:
        sol, prog = _recheck(solver, p, x, form, margin, prog, sol, m)
    if sol.status is Status.OPTIMAL:
        u = sol.x[:m].copy()
        nominal = p.nominal_at(x)[1:]
        objective = float(np.sum((u - nominal) ** 2))
    else:
        u, objective = None, np.nan
    return ControlResult(sol.status, u, objective, form, prog, sol)


def _feasibility_program(prog: ConeProgram, y_col: int) -> ConeProgram:
    """``prog`` without its objective: the last cone block (the epigraph) and column ``y_col`` removed."""
    rows = prog.n_rows - prog.cones[-1].dim
    keep = np.r_[0:y_col, y_col + 1:prog.n_vars]
    return ConeProgram(c=np.zeros(keep.size), A=prog.A[:rows][:, keep], b=prog.b[:rows], cones=prog.cones[:-1])


def _recheck(solver: SocpSolver, p: SynthesisProblem, x, form: Form, margin: float, prog: ConeProgram,
             sol: ConeSolution, m: int) -> tuple[ConeSolution, ConeProgram]:
    """Confirm a non-optimal outcome on the constraint set alone.

    The objective epigraph ``y >= ||u - k||^2`` is always satisfiable, but
    when the feasible controls lie far from the nominal one ``y`` is huge:
    its cone loses its digits and a nearly-zero Farkas ray passes the
    tolerance test although the program is feasible. The constraint-only
    program has no such variable; its infeasibility certificate, padded with
    zeros on the epigraph rows, is an exact certificate for the full program.
    If it is feasible instead, the full program is rebuilt with the epigraph
    balanced for ``||u - k||`` of that feasible point and its variables
    rescaled to the same size, then solved again.
    """
    y_col = m
    check = solver.solve(_feasibility_program(prog, y_col))
    if check.status is Status.INFEASIBLE:
        cert = np.concatenate([check.certificate, np.zeros(prog.cones[-1].dim)])
        return ConeSolution(Status.INFEASIBLE, sol.x, sol.s, sol.z, sol.objective, sol.gap,
                            sol.iterations + check.iterations, sol.wall_time, sol.primal_residual,
                            sol.dual_residual, cert, sol.history), prog
    if check.status is not Status.OPTIMAL:
        return sol, prog
    dist = float(np.linalg.norm(check.x[:m] - p.nominal_at(x)[1:]))
    scale = max(1.0, dist, float(np.max(np.abs(check.x), initial=0.0)))
    balanced = build_program(p, x, form, margin, objective_scale=max(1.0, dist))
    # x = D x': columns of u, t, s scale with the control, y with its square
    D = np.full(balanced.n_vars, scale)
    D[y_col] = scale**2
    scaled = ConeProgram(c=balanced.c * D, A=balanced.A * D, b=balanced.b, cones=balanced.cones,
                         var_names=balanced.var_names)
    again = solver.solve(scaled)
    if again.status is not Status.OPTIMAL:
        return sol, prog
    again.x = again.x * D
    again.objective = float(balanced.c @ again.x)
    return again, balanced
