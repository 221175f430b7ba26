"""Primal-dual interior-point solver for small dense second-order cone programs.

Homogeneous self-dual embedding of

    primal:  min c@x   s.t.  s = b - A x,  s in K
    dual:    max -b@z  s.t.  A^T z + c = 0,  z in K

with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Each
Newton system is reduced to the normal equations ``A^T W^{-2} A`` and factored
once per iteration; the predictor and corrector share the factorization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .cones import ConeLayout, NTScaling
from .polish import kkt_merit, polish
from .program import ConeProgram


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITERS = "MaxIters"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    feastol: float = 1e-8
    gaptol: float = 1e-8
    # after the tolerances above are met, keep iterating towards this relative
    # accuracy while steps still make progress; the best iterate is returned
    polish_tol: float = 1e-13
    infeastol: float = 1e-8
    max_iters: int = 200
    step_fraction: float = 0.99
    x0: np.ndarray | None = None
    equilibrate: bool = True
    polish: bool = True


@dataclass
class ConeSolution:
    status: Status
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    objective: float
    gap: float
    iterations: int
    wall_time: float
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    certificate: np.ndarray | None = None
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def kkt_residuals(prog: ConeProgram, x, s, z) -> dict:
    """Unscaled optimality measures of a candidate primal-dual point."""
    layout = ConeLayout.from_program(prog)
    pres = float(np.linalg.norm(prog.A @ x + s - prog.b))
    dres = float(np.linalg.norm(prog.A.T @ z + prog.c))
    comp = layout.block_dots(s, z)
    return {
        "primal": pres,
        "dual": dres,
        "gap": float(np.sum(comp)),
        "complementarity": float(np.max(np.abs(comp), initial=0.0)),
        "primal_cone": prog.cone_violation(s),
        "dual_cone": prog.cone_violation(z),
    }


def _block_scales(prog: ConeProgram) -> np.ndarray:
    """One positive factor per cone block; scaling a block leaves its cone unchanged."""
    scale = np.ones(prog.n_rows)
    for _, rows in prog.blocks():
        mag = max(float(np.max(np.abs(prog.A[rows]), initial=0.0)), float(np.max(np.abs(prog.b[rows]), initial=0.0)))
        if mag > 0:
            scale[rows] = 1.0 / mag
    return scale


class SocpSolver:
    """One solve per instance at a time; instances are independent."""

    def __init__(self, options: SolverOptions | None = None):
        self.options = options or SolverOptions()

    def solve(self, prog: ConeProgram) -> ConeSolution:
        start = time.perf_counter()
        try:
            # overflow in iterates is detected explicitly and falls back to the best iterate
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                sol = self._solve(prog)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            n, rows = prog.n_vars, prog.n_rows
            sol = ConeSolution(Status.NUMERICAL_FAILURE, np.full(n, np.nan), np.full(rows, np.nan),
                               np.full(rows, np.nan), np.nan, np.nan, 0, 0.0)
        sol.wall_time = time.perf_counter() - start
        return sol

    def _solve(self, prog: ConeProgram) -> ConeSolution:
        opts = self.options
        layout = ConeLayout.from_program(prog)
        nu = layout.degree
        row_scale = _block_scales(prog) if opts.equilibrate else np.ones(prog.n_rows)
        G = prog.A * row_scale[:, None]
        h = prog.b * row_scale
        c = prog.c
        n = prog.n_vars
        # termination is judged on the caller's (unscaled) data
        b_norm = 1.0 + float(np.linalg.norm(prog.b))
        c_norm = 1.0 + float(np.linalg.norm(c))

        x, s, z = self._initial_point(G, h, c, layout, opts.x0)
        tau, kappa = 1.0, 1.0
        history = []
        status = Status.MAX_ITERS
        cert = None
        best = None  # best iterate meeting the tolerances
        closest = None  # best iterate overall, a polishing seed if the method stalls
        stalls = 0

        def unscaled(x_, s_, z_, t_):
            return x_ / t_, s_ / row_scale / t_, z_ * row_scale / t_

        it = 0
        for it in range(opts.max_iters + 1):
            # residuals of the embedding
            r1 = G.T @ z + c * tau
            r2 = -G @ x + h * tau - s
            r3 = -c @ x - h @ z - kappa
            mu = (s @ z + tau * kappa) / (nu + 1)

            xs, ss, zs = unscaled(x, s, z, tau)
            pres = float(np.linalg.norm(prog.A @ xs + ss - prog.b))
            dres = float(np.linalg.norm(prog.A.T @ zs + c))
            pobj = float(c @ xs)
            gap = float(ss @ zs)
            history.append((it, pres, dres, gap, tau, kappa, mu))

            merit = max(pres / b_norm, dres / c_norm, abs(gap) / (1 + abs(pobj)))
            if closest is None or merit < closest[0]:
                closest = (merit, xs, ss, zs)
            if pres <= opts.feastol * b_norm and dres <= opts.feastol * c_norm and abs(gap) <= opts.gaptol * (1 + abs(pobj)):
                if best is None or merit < best[0]:
                    best = (merit, x.copy(), s.copy(), z.copy(), tau)
                    stalls = 0
                else:
                    stalls += 1
                if merit <= opts.polish_tol or stalls >= 2:
                    break
            elif best is not None:
                # accuracy was lost while polishing
                break
            hz = float(h @ z)
            if hz < 0:
                y = z * row_scale / (-hz)
                if np.linalg.norm(prog.A.T @ y) <= opts.infeastol and layout.min_eig(z) >= -1e-12:
                    status, cert = Status.INFEASIBLE, y
                    break
            cx = float(c @ x)
            if cx < 0:
                dx_ray = x / (-cx)
                ds_ray = s / row_scale / (-cx)
                if np.linalg.norm(prog.A @ dx_ray + ds_ray) <= opts.infeastol:
                    status, cert = Status.UNBOUNDED, dx_ray
                    break
            if it == opts.max_iters:
                break

            scaling = NTScaling(layout, s, z)
            lam = scaling.W(z)
            Gh = scaling.Winv(G)
            hh = scaling.Winv(h)
            # normal matrix Gh^T Gh through its QR factor: conditioning is not squared
            Rf = scipy.linalg.qr(Gh, mode="r", check_finite=False)[0][:n]
            diag = np.abs(np.diag(Rf))
            if diag.size and np.min(diag) <= 1e-13 * max(1.0, float(np.max(diag))):
                Rf = scipy.linalg.qr(np.vstack([Gh, 1e-10 * np.eye(n)]), mode="r", check_finite=False)[0][:n]

            def normal_solve(rhs):
                y = scipy.linalg.solve_triangular(Rf, rhs, trans="T", check_finite=False)
                return scipy.linalg.solve_triangular(Rf, y, check_finite=False)

            Ghh = Gh.T @ hh
            q = normal_solve(Ghh - c)
            a_vec = c + Ghh
            # equals hh@hh + kappa/tau - a_vec@q, written without cancellation
            res_q = hh - Gh @ q
            denom = res_q @ res_q + kappa / tau

            # The Newton system is solved in NT-scaled variables dzt = W dz, where
            # its blocks are well balanced:
            #   Gh^T dzt + c dtau = b1
            #   -Gh dx + dzt + hh dtau = b2t
            #   -c^T dx - hh^T dzt + (kappa/tau) dtau = b3
            def reduced_solve(b1, b2t, b3):
                p_ = normal_solve(b1 - Gh.T @ b2t)
                dtau = (b3 + hh @ b2t + a_vec @ p_) / denom
                dx = p_ + q * dtau
                dzt = b2t + Gh @ dx - hh * dtau
                return dx, dzt, dtau

            def kkt_apply(dx, dzt, dtau):
                return (
                    Gh.T @ dzt + c * dtau,
                    -Gh @ dx + dzt + hh * dtau,
                    -c @ dx - hh @ dzt + kappa / tau * dtau,
                )

            def newton(eta, ds_rhs, dk_rhs):
                scaled_ds = layout.jordan_solve(lam, ds_rhs)
                b1 = -eta * r1
                b2t = scaling.Winv(-eta * r2) + scaled_ds
                b3 = -eta * r3 + dk_rhs / tau
                dx, dzt, dtau = reduced_solve(b1, b2t, b3)
                for _ in range(4):
                    k1, k2, k3 = kkt_apply(dx, dzt, dtau)
                    e1, e2, e3 = b1 - k1, b2t - k2, b3 - k3
                    if (np.linalg.norm(e1) <= 1e-15 * (1.0 + np.linalg.norm(b1))
                            and np.linalg.norm(e2) <= 1e-15 * (1.0 + np.linalg.norm(b2t))
                            and abs(e3) <= 1e-15 * (1.0 + abs(b3))):
                        break
                    cx, cz, ct = reduced_solve(e1, e2, e3)
                    dx, dzt, dtau = dx + cx, dzt + cz, dtau + ct
                dz = scaling.Winv(dzt)
                # from the linear primal equation, so the primal residual shrinks exactly by (1 - eta)
                ds = eta * r2 - G @ dx + h * dtau
                dkappa = (dk_rhs - kappa * dtau) / tau
                return dx, ds, dz, dtau, dkappa

            def step_length(ds, dz, dtau, dkappa):
                # measured on lambda, which is well centred, rather than on s and z
                alpha = layout.max_step(lam, scaling.Winv(ds), scaling.W(dz))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha

            e = layout.identity()
            # predictor
            aff = newton(1.0, -layout.jordan(lam, lam), -tau * kappa)
            alpha_aff = min(1.0, step_length(*aff[1:]))
            sigma = (1.0 - alpha_aff) ** 3
            # corrector
            ds_a_scaled = scaling.Winv(aff[1])
            dz_a_scaled = scaling.W(aff[2])
            ds_rhs = -layout.jordan(lam, lam) - layout.jordan(ds_a_scaled, dz_a_scaled) + sigma * mu * e
            dk_rhs = -tau * kappa - aff[3] * aff[4] + sigma * mu
            dx, ds, dz, dtau, dkappa = newton(1.0 - sigma, ds_rhs, dk_rhs)
            alpha = min(1.0, opts.step_fraction * step_length(ds, dz, dtau, dkappa))
            if not np.isfinite(alpha) or alpha <= 1e-14:
                if best is None:
                    status = Status.NUMERICAL_FAILURE
                break
            x = x + alpha * dx
            s = s + alpha * ds
            z = z + alpha * dz
            tau = tau + alpha * dtau
            kappa = kappa + alpha * dkappa
            if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
                if best is None:
                    status = Status.NUMERICAL_FAILURE
                break

        if best is not None:
            status = Status.OPTIMAL
            x, s, z, tau = best[1:]
        xs, ss, zs = unscaled(x, s, z, tau)
        if status in (Status.NUMERICAL_FAILURE, Status.MAX_ITERS) and opts.polish and closest is not None:
            # a stalled run can still be certified optimal once polished
            polished = polish(prog, *closest[1:])
            if polished is not None and self._meets_tolerances(prog, *polished):
                status = Status.OPTIMAL
                xs, ss, zs = polished
        if status is Status.OPTIMAL:
            res = kkt_residuals(prog, xs, ss, zs)
            if opts.polish:
                polished = polish(prog, xs, ss, zs)
                if polished is not None and kkt_merit(prog, *polished) < kkt_merit(prog, xs, ss, zs):
                    xs, ss, zs = polished
                    res = kkt_residuals(prog, xs, ss, zs)
            return ConeSolution(status, xs, ss, zs, float(c @ xs), res["gap"], it, 0.0,
                                res["primal"], res["dual"], None, history)
        return ConeSolution(status, xs, ss, zs, float(c @ xs), float(ss @ zs), it, 0.0,
                            history[-1][1], history[-1][2], cert, history)

    def _meets_tolerances(self, prog: ConeProgram, x, s, z) -> bool:
        opts = self.options
        res = kkt_residuals(prog, x, s, z)
        return (
            res["primal"] <= opts.feastol * (1.0 + np.linalg.norm(prog.b))
            and res["dual"] <= opts.feastol * (1.0 + np.linalg.norm(prog.c))
            and abs(res["gap"]) <= opts.gaptol * (1.0 + abs(float(prog.c @ x)))
            and res["primal_cone"] <= opts.feastol
            and res["dual_cone"] <= opts.feastol
        )

    @staticmethod
    def _initial_point(G, h, c, layout: ConeLayout, x0):
        if x0 is None:
            x = np.linalg.lstsq(G, h, rcond=None)[0]
        else:
            x = np.asarray(x0, dtype=float).copy()
        s = layout.shift_interior(h - G @ x)
        # least-norm z with G^T z = -c
        z = -np.linalg.lstsq(G.T, c, rcond=None)[0]
        z = layout.shift_interior(z)
        return x, s, z


def solve(prog: ConeProgram, options: SolverOptions | None = None) -> ConeSolution:
    return SocpSolver(options).solve(prog)
