"""Fast feasibility certificates for the DRO synthesis program.

Each DRO constraint splits into one cone constraint per sample,

    ||Q^T u + r_vec|| <= w @ u + v,        u_ext = [1, u],

where ``Q``/``r_vec`` are the control/constant rows of ``r R`` and
``w``/``v`` the control/constant parts of ``-eps (q + R xi_i)``. Squaring gives
the quadratic form ``[1, u] H [1, u]^T <= 0`` with

    H = [[r_vec.r_vec - v^2, J], [J^T, F]],  F = Q Q^T - w w^T,  J = r_vec Q^T - v w^T,

and a single such constraint is feasible exactly when ``H`` is not positive
definite and the sign of the smallest eigenvalue of ``F`` together with a
scalar test puts the right branch of the quadric on the ``w @ u + v >= 0``
side. All checks below evaluate that test, batched over samples.

* :func:`check_necessary` -- some sample of every constraint must pass, or the
  program is certified infeasible.
* :func:`check_sufficient_single` -- for one constraint, inflate the radius by
  ``eps * max ||xi_i||`` so that one sample-free cone implies all sample cones.
* :func:`check_sufficient_slack` -- a sample-free test comparing the radius
  schedule against known CVaR slack of some controller.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dro import SynthesisProblem, radius_schedule
from .exceptions import RadiusMismatch, WrongM, ZeroRNorm
from .numerics import DEFAULT_TOL, is_positive_definite, min_eigenvalue, solve_spd, spectral_norm


class VerdictKind(str, Enum):
    CERTIFIED_INFEASIBLE = "CertifiedInfeasible"
    CERTIFIED_FEASIBLE = "CertifiedFeasible"
    INCONCLUSIVE = "Inconclusive"
    NOT_APPLICABLE = "NotApplicable"


class EigCase(int, Enum):
    """Which branch of the single-cone test applied (``NONE``: H was positive definite)."""

    NONE = 0
    NEG_EIG = 1
    POS_EIG = 2
    ZERO_EIG = 3

    @property
    def label(self) -> str:
        return {0: "None", 1: "NegEig", 2: "PosEig", 3: "ZeroEig"}[self.value]


@dataclass
class CaseRecord:
    l: int
    i: int
    h_not_pd: bool
    case: EigCase
    passes: bool


@dataclass
class FeasibilityVerdict:
    """Outcome of a certificate.

    ``h_not_pd``, ``case`` and ``passes`` are ``(M, N)`` arrays for the
    per-sample checks (``(1, 1)`` for the single-constraint check, empty for the
    slack check). ``reason`` names the violated hypothesis of a NotApplicable
    verdict; ``threshold`` and ``radius`` are filled by the slack check.
    """

    kind: VerdictKind
    method: str
    elapsed: float = 0.0
    h_not_pd: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    case: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=int))
    passes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))
    reason: str = ""
    threshold: float = float("nan")
    radius: float = float("nan")

    def records(self):
        """Per-(constraint, sample) case records."""
        M, N = self.case.shape
        for l in range(M):
            for i in range(N):
                yield CaseRecord(l, i, bool(self.h_not_pd[l, i]), EigCase(int(self.case[l, i])),
                                 bool(self.passes[l, i]))

    def witnesses(self, l: int) -> np.ndarray:
        """Sample indices whose cone passes the test for constraint ``l``."""
        return np.flatnonzero(self.passes[l])

    def as_row(self) -> dict:
        return {"method": self.method, "verdict": self.kind.value, "time_s": f"{self.elapsed:.9g}",
                "reason": self.reason}


@dataclass(frozen=True)
class SlackCertificate:
    """CVaR slack ``S_l >= 0`` of some controller, and a bound ``B >= 1`` on its extended norm."""

    S: tuple
    B: float

    def __post_init__(self):
        S = tuple(float(s) for s in np.atleast_1d(self.S))
        if any(s < 0 for s in S):
            raise ValueError("slack values must be nonnegative")
        if self.B < 1:
            raise ValueError("the norm bound of an extended control is at least 1")
        object.__setattr__(self, "S", S)


# -- the single-cone test ------------------------------------------------------


def cone_test(Q, r_vec, w, v, tol: float = DEFAULT_TOL):
    """Feasibility test of ``||Q^T u + r_vec|| <= w @ u + v`` over ``u``, batched over ``(w, v)``.

    ``Q`` is ``(m, k)`` and ``r_vec`` ``(k,)``, shared by the batch; ``w`` is
    ``(..., m)`` and ``v`` ``(...)``. ``Q Q^T`` must be invertible (checked by
    the callers). Returns ``(h_not_pd, case, passes)`` arrays of the batch
    shape. Eigenvalues within ``tol`` of zero take the zero branch.
    """
    Q = np.asarray(Q, dtype=float)
    r_vec = np.asarray(r_vec, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    m = Q.shape[0]
    QQt = Q @ Q.T
    Qr = Q @ r_vec
    F = QQt - w[..., :, None] * w[..., None, :]
    J = Qr - v[..., None] * w
    H = np.empty(v.shape + (m + 1, m + 1))
    H[..., 0, 0] = r_vec @ r_vec - v * v
    H[..., 0, 1:] = J
    H[..., 1:, 0] = J
    H[..., 1:, 1:] = F
    h_not_pd = ~np.asarray(is_positive_definite(H, tol), dtype=bool)
    lam = np.asarray(min_eigenvalue(F))

    neg = lam < -tol
    pos = lam > tol
    zero = ~(neg | pos)
    # positive branch: centre of the ellipsoid on the correct side of the plane
    F_safe = np.where(pos[..., None, None], F, np.eye(m))
    centre = solve_spd(F_safe, J)
    pos_ok = v - np.einsum("...j,...j->...", w, centre) >= 0
    # zero branch
    zero_ok = v - w @ np.linalg.solve(QQt, Qr) > 0

    case = np.where(neg, EigCase.NEG_EIG.value, np.where(pos, EigCase.POS_EIG.value, EigCase.ZERO_EIG.value))
    case = np.where(h_not_pd, case, EigCase.NONE.value)
    passes = h_not_pd & (neg | (pos & pos_ok) | (zero & zero_ok))
    return h_not_pd, case.astype(int), passes


def _qq_invertible(Q, tol: float) -> bool:
    Q = np.asarray(Q, dtype=float)
    return bool(min_eigenvalue(Q @ Q.T) > tol)


def reduced_cone_test(Q, r_vec, w, v, tol: float = DEFAULT_TOL):
    """:func:`cone_test` without the invertibility hypothesis on ``Q Q^T``.

    Only ``Q^T u`` and ``w @ u`` matter, so ``u`` is restricted to the range of
    ``Q`` (eigenvectors of ``Q Q^T`` above ``tol``), where the reduced ``Q`` has
    an invertible Gram matrix. A sample whose ``w`` leaves that range has a
    direction ``d`` with ``Q^T d = 0`` and ``w @ d > 0``; moving along it
    satisfies the cone, and ``F`` has a negative eigenvalue there, so it is
    reported on the negative branch.
    """
    Q = np.asarray(Q, dtype=float)
    r_vec = np.asarray(r_vec, dtype=float)
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    evals, evecs = np.linalg.eigh(Q @ Q.T)
    U = evecs[:, evals > tol]
    w_in = w @ U
    outside = np.linalg.norm(w - w_in @ U.T, axis=-1) > tol * np.maximum(1.0, np.linalg.norm(w, axis=-1))
    if U.shape[1] == 0:
        # u does not enter the norm: ||r_vec|| <= w @ u + v
        h_not_pd = r_vec @ r_vec - v * v <= tol
        passes = h_not_pd & (v >= 0)
        case = np.where(h_not_pd, EigCase.ZERO_EIG.value, EigCase.NONE.value)
    else:
        h_not_pd, case, passes = cone_test(U.T @ Q, r_vec, w_in, v, tol)
    h_not_pd = h_not_pd | outside
    case = np.where(outside, EigCase.NEG_EIG.value, case).astype(int)
    return h_not_pd, case, passes | outside


def _per_sample_test(Q, r_vec, w, v, tol, require_invertible):
    if _qq_invertible(Q, tol):
        return cone_test(Q, r_vec, w, v, tol)
    if require_invertible:
        return None
    return reduced_cone_test(Q, r_vec, w, v, tol)


# -- certificates ---------------------------------------------------------------


def check_necessary(p: SynthesisProblem, x=None, tol: float = DEFAULT_TOL,
                    require_invertible: bool = True) -> FeasibilityVerdict:
    """Per-sample necessary condition; CertifiedInfeasible if some constraint has no passing sample.

    A feasible program needs, for every constraint, at least one sample whose
    cone constraint is feasible on its own. When some ``r^2 R_ctrl R_ctrl^T``
    (rows of ``R`` multiplying the controls) is singular, e.g. ``r = 0`` or
    ``k < m``, the verdict is NotApplicable unless ``require_invertible`` is
    False, in which case :func:`reduced_cone_test` is used. The deterministic
    ``control_bound`` is not part of the test, so the verdict concerns the
    unbounded program.
    """
    start = time.perf_counter()
    p.check_eps()
    cons = p.constraints_at(x)
    r, eps = p.ambiguity.r, p.ambiguity.eps
    xi = p.samples.samples
    M, N = p.M, p.N
    h_not_pd = np.zeros((M, N), dtype=bool)
    case = np.zeros((M, N), dtype=int)
    passes = np.zeros((M, N), dtype=bool)
    for l, con in enumerate(cons):
        rhs = -eps * (con.q[None, :] + xi @ con.R.T)  # (N, m+1)
        out = _per_sample_test(r * con.R[1:, :], r * con.R[0, :], rhs[:, 1:], rhs[:, 0], tol, require_invertible)
        if out is None:
            return FeasibilityVerdict(VerdictKind.NOT_APPLICABLE, "necessary", time.perf_counter() - start,
                                      reason=f"QQTSingular(l={l})")
        h_not_pd[l], case[l], passes[l] = out
    kind = VerdictKind.INCONCLUSIVE if np.all(np.any(passes, axis=1)) else VerdictKind.CERTIFIED_INFEASIBLE
    return FeasibilityVerdict(kind, "necessary", time.perf_counter() - start, h_not_pd, case, passes)


def check_sufficient_single(p: SynthesisProblem, x=None, tol: float = DEFAULT_TOL,
                            require_invertible: bool = True) -> FeasibilityVerdict:
    """Single-constraint sufficient condition; CertifiedFeasible or Inconclusive.

    By Cauchy-Schwarz, ``(r + eps max_i ||xi_i||) ||R^T u_ext|| + eps u_ext @ q <= 0``
    implies every sample cone, so feasibility of that one cone certifies the
    program (without ``control_bound``). ``require_invertible`` as in
    :func:`check_necessary`.
    """
    start = time.perf_counter()
    if p.M != 1:
        raise WrongM(f"the single-constraint check needs M == 1, got M = {p.M}")
    p.check_eps()
    con = p.constraints_at(x)[0]
    eps = p.ambiguity.eps
    rho = p.ambiguity.r + eps * p.samples.max_norm()
    out = _per_sample_test(rho * con.R[1:, :], rho * con.R[0, :], -eps * con.q[None, 1:],
                           -eps * con.q[None, 0], tol, require_invertible)
    if out is None:
        return FeasibilityVerdict(VerdictKind.NOT_APPLICABLE, "sufficient1", time.perf_counter() - start,
                                  reason="QQTSingular(l=0)")
    h, c, ok = out
    kind = VerdictKind.CERTIFIED_FEASIBLE if ok[0] else VerdictKind.INCONCLUSIVE
    return FeasibilityVerdict(kind, "sufficient1", time.perf_counter() - start, h[None, :], c[None, :], ok[None, :])


def slack_threshold(p: SynthesisProblem, x, cert: SlackCertificate) -> float:
    """``min_l eps S_l / (2 ||R_l||_2 B)``; radii below it certify strict feasibility."""
    cons = p.constraints_at(x)
    if len(cert.S) != len(cons):
        raise ValueError(f"need one slack value per constraint ({len(cons)}), got {len(cert.S)}")
    eps = p.ambiguity.eps
    tau = np.inf
    for l, (con, S) in enumerate(zip(cons, cert.S)):
        norm = spectral_norm(con.R)
        if norm == 0:
            raise ZeroRNorm(f"constraint {l} has R = 0")
        tau = min(tau, eps * S / (2.0 * norm * cert.B))
    return float(tau)


def check_sufficient_slack(p: SynthesisProblem, x, cert: SlackCertificate) -> FeasibilityVerdict:
    """Sample-free probabilistic certificate.

    If ``r_N(eps_bar) < slack_threshold``, the program is strictly feasible
    with probability at least ``1 - eps_bar`` over the draw of the samples,
    for any radius ``r <= r_N(eps_bar)``. The configured radius must not exceed
    ``r_N(eps_bar)`` (RadiusMismatch).
    """
    start = time.perf_counter()
    amb = p.ambiguity
    r_N = radius_schedule(p.N, amb, k=p.samples.k)
    if amb.r > r_N * (1 + 1e-12):
        raise RadiusMismatch(f"radius {amb.r} exceeds the confidence radius {r_N} for N={p.N}")
    tau = slack_threshold(p, x, cert)
    kind = VerdictKind.CERTIFIED_FEASIBLE if r_N < tau else VerdictKind.INCONCLUSIVE
    return FeasibilityVerdict(kind, "sufficient3", time.perf_counter() - start, threshold=tau, radius=r_N)
