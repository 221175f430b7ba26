"""CVaR, Wasserstein radius schedule, and the cone reformulations of the DRO constraints.

With a type-1 Wasserstein ball of radius ``r`` around ``N`` samples and risk
level ``eps <= 1/N``, the worst-case CVaR constraint on
``G(u, xi) = u_ext @ q + u_ext @ R @ xi`` is equivalent to the ``N``
second-order cone constraints

    r * ||R^T u_ext|| + eps * u_ext @ (q + R @ xi_i) <= 0,   i = 1..N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import DimensionMismatch, EmptyInput, EpsTooLarge, InvalidConfig
from .model import ConstraintData, ext_control
from .socp.program import Cone, ConeProgram

# Absolute tolerance for the eps <= 1/N check; 1/N itself is rarely exact in floating point.
_EPS_SLACK = 1e-12


@dataclass(frozen=True)
class SampleSet:
    samples: np.ndarray

    def __post_init__(self):
        xs = np.array(self.samples, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        if xs.ndim != 2 or xs.shape[0] < 1:
            raise EmptyInput("a sample set needs at least one sample")
        if not np.all(np.isfinite(xs)):
            raise ValueError("samples must be finite")
        xs.setflags(write=False)
        object.__setattr__(self, "samples", xs)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def k(self) -> int:
        return self.samples.shape[1]

    def append(self, more) -> "SampleSet":
        more = np.asarray(more, dtype=float).reshape(-1, self.k)
        return SampleSet(np.vstack([self.samples, more]))

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.samples, axis=1)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"xi{j + 1}" for j in range(self.k)])
            writer.writerows([[repr(float(v)) for v in row] for row in self.samples])

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if lineno == 1:
                        continue  # header
                    raise ValueError(f"{path}:{lineno}: non-numeric sample row")
        return cls(np.array(rows))


@dataclass(frozen=True)
class AmbiguityConfig:
    """Wasserstein ball radius ``r``, risk level ``eps`` and the tail constants of the radius schedule."""

    r: float
    eps: float
    eps_bar: float = 0.1
    c1: float = 2.0
    c2: float = 1.0
    a: float = 2.0
    k: int | None = None

    def __post_init__(self):
        if self.r < 0:
            raise InvalidConfig("radius must be nonnegative")
        if not 0 < self.eps <= 1:
            raise InvalidConfig("eps must lie in (0, 1]")
        if not 0 < self.eps_bar < 1:
            raise InvalidConfig("eps_bar must lie in (0, 1)")
        if min(self.c1, self.c2, self.a) <= 0:
            raise InvalidConfig("c1, c2 and a must be positive")


ConstraintSource = Union[ConstraintData, Callable[[np.ndarray], ConstraintData]]
NominalSource = Union[Sequence[float], np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SynthesisProblem:
    """Min-norm deviation from a nominal control subject to ``M`` DRO constraints.

    ``constraints`` and ``nominal`` may be fixed data or callables of the state.
    ``nominal`` is the extended control ``[1, u_nom]``. ``control_bound``
    optionally adds the deterministic constraint ``||u|| <= control_bound``.
    """

    constraints: tuple
    nominal: NominalSource
    ambiguity: AmbiguityConfig
    samples: SampleSet
    control_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.constraints) < 1:
            raise EmptyInput("need at least one constraint")

    @property
    def M(self) -> int:
        return len(self.constraints)

    @property
    def N(self) -> int:
        return self.samples.N

    def constraints_at(self, x) -> list[ConstraintData]:
        out = [c if isinstance(c, ConstraintData) else c(np.asarray(x, dtype=float)) for c in self.constraints]
        m, k = out[0].m, out[0].k
        for c in out:
            if c.m != m or c.k != k:
                raise DimensionMismatch("all constraints must share (m, k)")
        if k != self.samples.k:
            raise DimensionMismatch(f"constraints have k={k}, samples have k={self.samples.k}")
        return out

    def nominal_at(self, x) -> np.ndarray:
        nom = self.nominal(np.asarray(x, dtype=float)) if callable(self.nominal) else self.nominal
        nom = np.asarray(nom, dtype=float).reshape(-1)
        if nom[0] != 1.0:
            raise ValueError("nominal extended control must start with 1")
        return nom

    def with_samples(self, samples: SampleSet) -> "SynthesisProblem":
        return replace(self, samples=samples)

    def with_ambiguity(self, **changes) -> "SynthesisProblem":
        return replace(self, ambiguity=replace(self.ambiguity, **changes))

    def check_eps(self) -> None:
        if self.ambiguity.eps > 1.0 / self.N + _EPS_SLACK:
            raise EpsTooLarge(f"eps={self.ambiguity.eps} exceeds 1/N={1.0 / self.N}")


def cvar_empirical(values, eps: float) -> float:
    """Exact ``inf_t [ mean((v + t)_+) / eps - t ]`` over the sample values.

    The objective is piecewise linear with breakpoints at ``t = -v_j``, so the
    infimum is the smallest objective value over those breakpoints.
    """
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise EmptyInput("cvar of an empty sample")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    n = v.size
    # objective at t = -v_j: sum_{i > j}(v_i - v_j) / (n eps) + v_j
    suffix = np.concatenate([np.cumsum(v[::-1])[::-1][1:], [0.0]])
    count_above = np.arange(n - 1, -1, -1)
    objective = (suffix - count_above * v) / (n * eps) + v
    return float(np.min(objective))


def radius_schedule(N: int, cfg: AmbiguityConfig, k: int | None = None) -> float:
    """Confidence radius ``r_N(eps_bar)`` of the Wasserstein ball for ``N`` samples."""
    if N < 1:
        raise EmptyInput("need at least one sample")
    k = k if k is not None else cfg.k
    if k is None:
        raise InvalidConfig("uncertainty dimension k is required")
    log_term = math.log(cfg.c1 / cfg.eps_bar)
    if log_term <= 0:
        raise InvalidConfig(f"log(c1/eps_bar) = {log_term:.3g} must be positive; raise c1 or lower eps_bar")
    base = log_term / (cfg.c2 * N)
    if N >= log_term / cfg.c2:
        return base ** (1.0 / max(k, 2))
    return base ** (1.0 / cfg.a)


@dataclass(frozen=True)
class SocConstraint:
    """``||A @ u_ext|| + c @ u_ext <= 0``."""

    A: np.ndarray
    c: np.ndarray
    label: str = ""

    def value(self, u_ext) -> float:
        u_ext = np.asarray(u_ext, dtype=float)
        return float(np.linalg.norm(self.A @ u_ext) + self.c @ u_ext)


def reduce_to_soc(p: SynthesisProblem, l: int, x=None) -> list[SocConstraint]:
    """Per-sample cone constraints equivalent to DRO constraint ``l``."""
    p.check_eps()
    con = p.constraints_at(x)[l]
    r, eps = p.ambiguity.r, p.ambiguity.eps
    A = r * con.R.T
    shifted = con.q[None, :] + p.samples.samples @ con.R.T  # (N, m+1): q + R xi_i
    return [
        SocConstraint(A=A, c=eps * shifted[i], label=f"{con.label}[{i}]") for i in range(p.N)
    ]


def _epigraph_block(m: int, n_vars: int, u_cols: slice, y_col: int, nominal_u: np.ndarray, lam: float = 1.0):
    """Rows for ``y/lam + lam >= ||(2 (u - k), y/lam - lam)||``, i.e. ``y >= ||u - k||^2``.

    Any ``lam > 0`` gives the same set; ``lam`` near ``||u - k||`` keeps the
    head and tail of the cone from agreeing to all digits when ``y`` is large.
    """
    if lam <= 0:
        raise ValueError("objective scale must be positive")
    A = np.zeros((m + 2, n_vars))
    b = np.zeros(m + 2)
    A[0, y_col] = -1.0 / lam
    b[0] = lam
    A[1 : m + 1, u_cols] = -2.0 * np.eye(m)
    b[1 : m + 1] = -2.0 * nominal_u
    A[m + 1, y_col] = -1.0 / lam
    b[m + 1] = -lam
    return A, b, Cone.soc(m + 2)


def _norm_block(rR: np.ndarray, n_vars: int, u_cols: slice):
    """Rows ``r R^T u_ext`` of a norm term, or None when they vanish identically."""
    if not np.any(rR):
        return None
    k = rR.shape[1]
    A = np.zeros((k, n_vars))
    A[:, u_cols] = -rR[1:, :].T
    return A, rR[0, :].copy()


def _bound_block(m: int, n_vars: int, u_cols: slice, bound: float):
    A = np.zeros((m + 1, n_vars))
    b = np.zeros(m + 1)
    b[0] = bound
    A[1:, u_cols] = -np.eye(m)
    return A, b, Cone.soc(m + 1)


def assemble_reduced_socp(p: SynthesisProblem, x=None, margin: float = 0.0, objective_scale: float = 1.0) -> ConeProgram:
    """Variables ``(u, y)``; one cone per (constraint, sample) plus the objective epigraph.

    ``margin`` tightens every DRO cone to ``r||R^T u_ext|| + eps u_ext@(q+R xi_i) <= -margin``.
    """
    p.check_eps()
    cons = p.constraints_at(x)
    nominal = p.nominal_at(x)
    m = cons[0].m
    n_vars = m + 1
    u_cols, y_col = slice(0, m), m
    r, eps = p.ambiguity.r, p.ambiguity.eps
    rows_A, rows_b, cones = [], [], []
    for con in cons:
        shifted = con.q[None, :] + p.samples.samples @ con.R.T
        norm = _norm_block(r * con.R, n_vars, u_cols)
        for i in range(p.N):
            lin_A = np.zeros((1, n_vars))
            lin_A[0, u_cols] = eps * shifted[i, 1:]
            lin_b = np.array([-eps * shifted[i, 0] - margin])
            if norm is None:
                rows_A.append(lin_A)
                rows_b.append(lin_b)
                cones.append(Cone.nonneg(1))
            else:
                rows_A.append(np.vstack([lin_A, norm[0]]))
                rows_b.append(np.concatenate([lin_b, norm[1]]))
                cones.append(Cone.soc(1 + norm[0].shape[0]))
    if p.control_bound is not None:
        A, b, cone = _bound_block(m, n_vars, u_cols, p.control_bound)
        rows_A.append(A)
        rows_b.append(b)
        cones.append(cone)
    A, b, cone = _epigraph_block(m, n_vars, u_cols, y_col, nominal[1:], objective_scale)
    rows_A.append(A)
    rows_b.append(b)
    cones.append(cone)
    c = np.zeros(n_vars)
    c[y_col] = 1.0
    names = [f"u{j + 1}" for j in range(m)] + ["y"]
    return ConeProgram(c=c, A=np.vstack(rows_A), b=np.concatenate(rows_b), cones=cones, var_names=names)


def assemble_epigraph_socp(p: SynthesisProblem, x=None, objective_scale: float = 1.0) -> ConeProgram:
    """The DRO-SOCP with auxiliary epigraph variables.

    Variables are ``(u, y, t_1..t_M, s_{1,1}..s_{M,N})``; every constraint ``l``
    gets its own CVaR threshold ``t_l`` and tail variables ``s_{l,i}``. Blocks,
    in order: one norm cone per ``l``, the tail inequalities
    ``s_{l,i} >= G_l(x, u_ext, xi_i) + t_l``, ``s_{l,i} >= 0``, and the
    rotated-cone epigraph of the objective.
    """
    p.check_eps()
    cons = p.constraints_at(x)
    nominal = p.nominal_at(x)
    m, M, N = cons[0].m, p.M, p.N
    r, eps = p.ambiguity.r, p.ambiguity.eps
    u_cols, y_col = slice(0, m), m
    t_col = m + 1
    s_col = m + 1 + M
    n_vars = s_col + M * N

    def s_index(l, i):
        return s_col + l * N + i

    rows_A, rows_b, cones = [], [], []
    for l, con in enumerate(cons):
        # eps t_l - mean_i s_{l,i} >= r ||R_l^T u_ext||
        lead = np.zeros((1, n_vars))
        lead[0, t_col + l] = -eps
        lead[0, s_index(l, 0) : s_index(l, 0) + N] = 1.0 / N
        norm = _norm_block(r * con.R, n_vars, u_cols)
        if norm is None:
            rows_A.append(lead)
            rows_b.append(np.zeros(1))
            cones.append(Cone.nonneg(1))
        else:
            rows_A.append(np.vstack([lead, norm[0]]))
            rows_b.append(np.concatenate([[0.0], norm[1]]))
            cones.append(Cone.soc(1 + norm[0].shape[0]))
    for l, con in enumerate(cons):
        shifted = con.q[None, :] + p.samples.samples @ con.R.T
        A = np.zeros((N, n_vars))
        A[:, u_cols] = shifted[:, 1:]
        A[:, t_col + l] = 1.0
        A[np.arange(N), s_index(l, 0) + np.arange(N)] = -1.0
        rows_A.append(A)
        rows_b.append(-shifted[:, 0])
        cones.append(Cone.nonneg(N))
    A = np.zeros((M * N, n_vars))
    A[np.arange(M * N), s_col + np.arange(M * N)] = -1.0
    rows_A.append(A)
    rows_b.append(np.zeros(M * N))
    cones.append(Cone.nonneg(M * N))
    if p.control_bound is not None:
        A, b, cone = _bound_block(m, n_vars, u_cols, p.control_bound)
        rows_A.append(A)
        rows_b.append(b)
        cones.append(cone)
    A, b, cone = _epigraph_block(m, n_vars, u_cols, y_col, nominal[1:], objective_scale)
    rows_A.append(A)
    rows_b.append(b)
    cones.append(cone)
    c = np.zeros(n_vars)
    c[y_col] = 1.0
    names = (
        [f"u{j + 1}" for j in range(m)]
        + ["y"]
        + [f"t{l + 1}" for l in range(M)]
        + [f"s{l + 1}_{i + 1}" for l in range(M) for i in range(N)]
    )
    return ConeProgram(c=c, A=np.vstack(rows_A), b=np.concatenate(rows_b), cones=cones, var_names=names)
