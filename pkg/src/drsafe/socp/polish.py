"""Active-set polishing of an interior-point solution.

Interior-point iterates of second-order cone programs stall once the smallest
cone eigenvalues approach machine precision, which leaves a duality gap of
roughly 1e-10.  For a strongly convex objective the primal error behaves like
the square root of that gap.  Polishing guesses, from the near-optimal pair
``(s, z)``, which blocks are inactive, which sit on the cone boundary and which
are pinned at zero, and then runs Newton's method on the resulting smooth KKT
system:

    c + sum_j lam_j A_j^T J s_j(x) + A_E^T z_E = 0
    (1/2) s_j(x)^T J s_j(x) = 0        (boundary blocks, J = diag(1, -1, ...))
    b_E - A_E x = 0                     (pinned rows)

The polished point is only used when it is a valid primal-dual pair with
smaller residuals than the point it started from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .program import ConeKind, ConeProgram

BOUNDARY, PINNED, INACTIVE = "boundary", "pinned", "inactive"


@dataclass
class _Unit:
    """An orthant row or a second-order block, with its guessed role."""

    rows: slice
    soc: bool
    label: str
    confidence: float  # ratio separating the chosen label from the runner-up


@dataclass
class _ActiveSet:
    boundary: list  # slices of second-order blocks with s and z on the boundary
    pinned: np.ndarray  # row indices with s == 0


def _eigs(v):
    n1 = float(np.linalg.norm(v[1:]))
    return v[0] - n1, v[0] + n1


def _ratio(big, small):
    return big / small if small > 0 else np.inf


def classify(prog: ConeProgram, s, z) -> list:
    """Guess the role of every block by comparing the spectra of ``s`` and ``z``.

    Near the central path the small eigenvalue of one factor pairs with the
    large eigenvalue of the other, so pairwise comparison is enough and needs
    no absolute threshold. The comparison ratio doubles as a confidence.
    """
    units = []
    for cone, rows in prog.blocks():
        if cone.kind is ConeKind.NONNEG or cone.dim == 1:
            for i in range(rows.start, rows.stop):
                si, zi = max(s[i], 0.0), max(z[i], 0.0)
                label = PINNED if zi > si else INACTIVE
                units.append(_Unit(slice(i, i + 1), False, label, _ratio(max(si, zi), min(si, zi))))
            continue
        s_lo, s_hi = (max(v, 0.0) for v in _eigs(s[rows]))
        z_lo, z_hi = (max(v, 0.0) for v in _eigs(z[rows]))
        if s_hi <= z_lo:
            units.append(_Unit(rows, True, PINNED, _ratio(z_lo, s_hi)))
        elif z_hi <= s_lo:
            units.append(_Unit(rows, True, INACTIVE, _ratio(s_lo, z_hi)))
        else:
            units.append(_Unit(rows, True, BOUNDARY, min(_ratio(z_hi, s_lo), _ratio(s_hi, z_lo))))
    return units


def _active_set(units) -> _ActiveSet:
    boundary = [u.rows for u in units if u.label == BOUNDARY]
    pinned = [np.arange(u.rows.start, u.rows.stop) for u in units if u.label == PINNED]
    return _ActiveSet(boundary, np.concatenate(pinned).astype(int) if pinned else np.zeros(0, dtype=int))


def _jflip(v):
    out = -v
    out[0] = v[0]
    return out


def _scaled_lstsq(jac, rhs, passes: int = 8):
    """Least-squares solve after Ruiz equilibration of rows and columns.

    Multiplier columns and constraint rows of near-apex blocks are tiny, so
    without equilibration their singular values fall below the cut-off.
    """
    dr = np.ones(jac.shape[0])
    dc = np.ones(jac.shape[1])
    scaled = jac.copy()
    for _ in range(passes):
        rmax = np.max(np.abs(scaled), axis=1)
        cmax = np.max(np.abs(scaled), axis=0)
        rf = 1.0 / np.sqrt(np.where(rmax > 0, rmax, 1.0))
        cf = 1.0 / np.sqrt(np.where(cmax > 0, cmax, 1.0))
        scaled *= rf[:, None] * cf[None, :]
        dr *= rf
        dc *= cf
    # rank-revealing QR: much cheaper than an SVD on large systems, same cut-off
    cond = np.finfo(float).eps * max(scaled.shape)
    return dc * scipy.linalg.lstsq(scaled, dr * rhs, cond=cond, lapack_driver="gelsy", check_finite=False)[0]


def _newton(prog: ConeProgram, act: _ActiveSet, x, s, z, max_iters: int):
    """Newton's method on the KKT system of ``act``; returns the best point seen."""
    A, b, c = prog.A, prog.b, prog.c
    n = prog.n_vars
    nb, ne = len(act.boundary), act.pinned.size
    A_E = A[act.pinned]
    # boundary rows stacked, with the block id and the J sign of every row
    rows_b = np.concatenate([np.arange(r.start, r.stop) for r in act.boundary]) if nb else np.zeros(0, dtype=int)
    block_of = np.concatenate([np.full(r.stop - r.start, j) for j, r in enumerate(act.boundary)]) if nb \
        else np.zeros(0, dtype=int)
    sign = np.concatenate([np.r_[1.0, -np.ones(r.stop - r.start - 1)] for r in act.boundary]) if nb \
        else np.zeros(0)
    A_B, b_B = A[rows_b], b[rows_b]
    # multipliers from the current dual point
    js = sign * s[rows_b]
    lam = np.maximum(np.bincount(block_of, z[rows_b] * js, nb) / np.maximum(np.bincount(block_of, js * js, nb),
                                                                          1e-300), 0.0)
    z_e = z[act.pinned].copy()

    def residual(x_, lam_, ze_):
        js_ = sign * (b_B - A_B @ x_)
        grad = c + A_E.T @ ze_ + A_B.T @ (lam_[block_of] * js_)
        cons = 0.5 * np.bincount(block_of, js_ * (b_B - A_B @ x_), nb)
        return np.concatenate([grad, cons, b[act.pinned] - A_E @ x_])

    res = residual(x, lam, z_e)
    best = (float(np.linalg.norm(res)), x, lam, z_e, res)
    for _ in range(max_iters):
        jac = np.zeros((n + nb + ne, n + nb + ne))
        Js = sign * (b_B - A_B @ x)
        # sum_j lam_j A_j^T J A_j in one product
        jac[:n, :n] = -(A_B.T * (lam[block_of] * sign)) @ A_B
        col = np.zeros((A_B.shape[0], nb))
        col[np.arange(A_B.shape[0]), block_of] = Js
        coupling = A_B.T @ col  # column j: A_j^T J s_j
        jac[:n, n:n + nb] = coupling
        jac[n:n + nb, :n] = -coupling.T
        jac[:n, n + nb:] = A_E.T
        jac[n + nb:, :n] = -A_E
        step = _scaled_lstsq(jac, -res)
        x_new = x + step[:n]
        lam_new = lam + step[n:n + nb]
        ze_new = z_e + step[n + nb:]
        res_new = residual(x_new, lam_new, ze_new)
        if not np.all(np.isfinite(res_new)):
            break
        # full Newton steps; the residual norm need not decrease monotonically
        x, lam, z_e, res = x_new, lam_new, ze_new, res_new
        if np.linalg.norm(res) < best[0]:
            best = (float(np.linalg.norm(res)), x, lam, z_e, res)
        if best[0] <= 1e-15 * (1 + np.linalg.norm(c) + np.linalg.norm(b)):
            break
    return best


def _assemble(prog: ConeProgram, act: _ActiveSet, x, lam, z_e):
    A, b = prog.A, prog.b
    s_new = b - A @ x
    z_new = np.zeros(prog.n_rows)
    for j, rows in enumerate(act.boundary):
        blk = s_new[rows]
        # rounding can leave the boundary slack a hair outside the cone
        blk[0] = max(blk[0], float(np.linalg.norm(blk[1:])))
        s_new[rows] = blk
        z_new[rows] = lam[j] * _jflip(blk)
    s_new[act.pinned] = 0.0
    z_new[act.pinned] = z_e
    return x, s_new, z_new


def kkt_merit(prog: ConeProgram, x, s, z) -> float:
    """Worst normalized KKT violation: residuals, complementarity and cone membership."""
    pres = np.linalg.norm(prog.A @ x + s - prog.b) / (1.0 + np.linalg.norm(prog.b))
    dres = np.linalg.norm(prog.A.T @ z + prog.c) / (1.0 + np.linalg.norm(prog.c))
    comp = 0.0
    for _, rows in prog.blocks():
        comp = max(comp, abs(float(s[rows] @ z[rows])))
    comp /= 1.0 + abs(float(prog.c @ x))
    return float(max(pres, dres, comp, prog.cone_violation(s), prog.cone_violation(z)))


def polish(prog: ConeProgram, x, s, z, max_iters: int = 12, max_changes: int = 4,
           doubtful: float = 1e4):
    """Return the best polished ``(x, s, z)``, or ``None`` if no candidate could be formed.

    The first guess of the active set can be wrong for weakly active blocks
    (confidence below ``doubtful``) and on degenerate optimal faces, where a
    boundary block sits at the cone's apex or its constraint is implied to
    first order by the others. Doubtful units are re-labelled one at a time,
    then the boundary block with the largest remaining residual, keeping each
    change only when it lowers :func:`kkt_merit`.
    """
    n = prog.n_vars
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s)) and np.all(np.isfinite(z))):
        return None

    def attempt(units):
        act = _active_set(units)
        if len(act.boundary) + act.pinned.size == 0:
            return np.inf, None, None
        try:
            _, x_p, lam, z_e, res = _newton(prog, act, x.copy(), s, z, max_iters)
        except np.linalg.LinAlgError:
            return np.inf, None, None
        if not np.all(lam >= 0):
            return np.inf, None, res
        cand = _assemble(prog, act, x_p, lam, z_e)
        return kkt_merit(prog, *cand), cand, res

    def relabel(units, k, label):
        out = list(units)
        u = units[k]
        out[k] = _Unit(u.rows, u.soc, label, u.confidence)
        return out

    def alternatives(u):
        if u.soc:
            return [lab for lab in (BOUNDARY, PINNED, INACTIVE) if lab != u.label]
        return [PINNED if u.label == INACTIVE else INACTIVE]

    units = classify(prog, s, z)
    merit, best, res = attempt(units)
    if merit <= 1e-14:
        return best

    doubtful_units = sorted((k for k, u in enumerate(units) if u.confidence < doubtful),
                            key=lambda k: units[k].confidence)
    for k in doubtful_units[:max_changes]:
        for label in alternatives(units[k]):
            trial = relabel(units, k, label)
            m_t, cand_t, res_t = attempt(trial)
            if m_t < merit:
                units, merit, best, res = trial, m_t, cand_t, res_t
        if merit <= 1e-14:
            return best

    for _ in range(max_changes):
        boundary = [k for k, u in enumerate(units) if u.label == BOUNDARY]
        if not boundary or res is None or merit <= 1e-14:
            break
        worst = boundary[int(np.argmax(np.abs(res[n:n + len(boundary)])))]
        options = [relabel(units, worst, lab) for lab in (PINNED, INACTIVE)]
        scored = [attempt(o) + (o,) for o in options]
        m_t, cand_t, res_t, trial = min(scored, key=lambda t: t[0])
        if m_t >= merit:
            break
        units, merit, best, res = trial, m_t, cand_t, res_t
    return best
