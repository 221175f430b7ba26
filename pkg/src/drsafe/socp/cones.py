"""Cone algebra for products of nonnegative orthants and second-order cones.

Second-order blocks of equal dimension are gathered into ``(count, dim)``
arrays so that scaling, Jordan products and step lengths are vectorized over
blocks. One-dimensional second-order cones are treated as orthant entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import ConeProgram


@dataclass
class ConeLayout:
    n_rows: int
    lp: np.ndarray  # row indices of orthant entries
    soc: dict  # dim -> (count, dim) row indices

    @classmethod
    def from_program(cls, prog: ConeProgram) -> "ConeLayout":
        lp, soc = prog.grouped_rows()
        return cls(prog.n_rows, lp, soc)

    @property
    def degree(self) -> int:
        return len(self.lp) + sum(idx.shape[0] for idx in self.soc.values())

    def identity(self) -> np.ndarray:
        e = np.zeros(self.n_rows)
        e[self.lp] = 1.0
        for idx in self.soc.values():
            e[idx[:, 0]] = 1.0
        return e

    def min_eig(self, v) -> float:
        """Smallest Jordan eigenvalue; positive iff ``v`` is interior."""
        out = np.inf
        if self.lp.size:
            out = min(out, float(np.min(v[self.lp])))
        for idx in self.soc.values():
            blk = v[idx]
            out = min(out, float(np.min(blk[:, 0] - np.linalg.norm(blk[:, 1:], axis=1))))
        return out

    def shift_interior(self, v) -> np.ndarray:
        alpha = self.min_eig(v)
        if alpha > 1e-8 * max(1.0, float(np.max(np.abs(v), initial=0.0))):
            return v.copy()
        return v + (1.0 + max(-alpha, 0.0)) * self.identity()

    def block_dots(self, s, z) -> np.ndarray:
        """``s_j @ z_j`` per cone block (orthant entries count as separate blocks)."""
        parts = [s[self.lp] * z[self.lp]]
        for idx in self.soc.values():
            parts.append(np.einsum("cd,cd->c", s[idx], z[idx]))
        return np.concatenate(parts)

    # -- Jordan algebra --------------------------------------------------------

    def jordan(self, u, v) -> np.ndarray:
        out = np.empty(self.n_rows)
        out[self.lp] = u[self.lp] * v[self.lp]
        for idx in self.soc.values():
            ub, vb = u[idx], v[idx]
            out[idx[:, 0]] = np.einsum("cd,cd->c", ub, vb)
            out[idx[:, 1:]] = ub[:, :1] * vb[:, 1:] + vb[:, :1] * ub[:, 1:]
        return out

    def jordan_solve(self, lam, r) -> np.ndarray:
        """Solve ``lam o x = r`` for ``x`` (``lam`` interior)."""
        out = np.empty(self.n_rows)
        out[self.lp] = r[self.lp] / lam[self.lp]
        for idx in self.soc.values():
            lb, rb = lam[idx], r[idx]
            l0, l1 = lb[:, 0], lb[:, 1:]
            r0, r1 = rb[:, 0], rb[:, 1:]
            rho = l0 * l0 - np.einsum("cd,cd->c", l1, l1)
            x0 = (l0 * r0 - np.einsum("cd,cd->c", l1, r1)) / rho
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (r1 - x0[:, None] * l1) / l0[:, None]
        return out

    # -- step length -----------------------------------------------------------

    def max_step(self, v, *dirs) -> float:
        """Largest ``alpha`` (capped at 1e30) with ``v + alpha d`` in the cone for every ``d`` in ``dirs``."""
        alpha = 1e30
        if self.lp.size:
            vl = v[self.lp]
            for dv in dirs:
                d = dv[self.lp]
                neg = d < 0
                if np.any(neg):
                    alpha = min(alpha, float(np.min(-vl[neg] / d[neg])))
        for idx in self.soc.values():
            vb = v[idx]
            v0, v1 = vb[:, 0], vb[:, 1:]
            nv1 = np.sqrt(np.einsum("cd,cd->c", v1, v1))
            c = np.maximum((v0 - nv1) * (v0 + nv1), 0.0)
            for dv in dirs:
                db = dv[idx]
                d0, d1 = db[:, 0], db[:, 1:]
                # v + alpha d leaves the cone at the first positive root of a alpha^2 + 2 b alpha + c
                a = d0 * d0 - np.einsum("cd,cd->c", d1, d1)
                b = v0 * d0 - np.einsum("cd,cd->c", v1, d1)
                disc = b * b - a * c
                sq = np.sqrt(np.maximum(disc, 0.0))
                with np.errstate(divide="ignore", invalid="ignore"):
                    root = np.where((b < 0) & (disc >= 0), c / (sq - b), np.inf)
                    root = np.where((a < 0) & (b >= 0), (b + sq) / -a, root)
                root = np.where(np.isnan(root), 0.0, root)
                alpha = min(alpha, float(np.min(root, initial=np.inf)))
        return max(alpha, 0.0)


class NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-1} s = lambda``; ``W`` is symmetric."""

    def __init__(self, layout: ConeLayout, s, z):
        self.layout = layout
        self.lp_w = np.sqrt(s[layout.lp] / z[layout.lp])
        self.blocks = {}
        for d, idx in layout.soc.items():
            sb, zb = s[idx], z[idx]
            s_r = np.sqrt(np.maximum(sb[:, 0] ** 2 - np.einsum("cd,cd->c", sb[:, 1:], sb[:, 1:]), 1e-300))
            z_r = np.sqrt(np.maximum(zb[:, 0] ** 2 - np.einsum("cd,cd->c", zb[:, 1:], zb[:, 1:]), 1e-300))
            sn = sb / s_r[:, None]
            zn = zb / z_r[:, None]
            gamma = np.sqrt(np.maximum((1.0 + np.einsum("cd,cd->c", sn, zn)) / 2.0, 1e-300))
            zj = zn.copy()
            zj[:, 1:] *= -1.0
            w = (sn + zj) / (2.0 * gamma[:, None])
            eta = np.sqrt(s_r / z_r)
            w0, w1 = w[:, 0], w[:, 1:]
            base = np.einsum("ci,cj->cij", w1, w1) / (1.0 + w0)[:, None, None] + np.eye(d - 1)
            Wm = np.empty((idx.shape[0], d, d))
            Wm[:, 0, 0] = w0
            Wm[:, 0, 1:] = w1
            Wm[:, 1:, 0] = w1
            Wm[:, 1:, 1:] = base
            Winv = Wm.copy()
            Winv[:, 0, 1:] *= -1.0
            Winv[:, 1:, 0] *= -1.0
            self.blocks[d] = (Wm * eta[:, None, None], Winv / eta[:, None, None])

    def _apply(self, v, inverse: bool) -> np.ndarray:
        """Apply ``W`` (or ``W^{-1}``) to a vector or to the rows of a matrix."""
        layout = self.layout
        out = np.empty_like(v)
        w = 1.0 / self.lp_w if inverse else self.lp_w
        if v.ndim == 1:
            out[layout.lp] = w * v[layout.lp]
        else:
            out[layout.lp] = w[:, None] * v[layout.lp]
        for d, idx in layout.soc.items():
            mat = self.blocks[d][1 if inverse else 0]
            if v.ndim == 1:
                out[idx] = np.einsum("cij,cj->ci", mat, v[idx])
            else:
                out[idx] = np.einsum("cij,cjn->cin", mat, v[idx])
        return out

    def W(self, v):
        return self._apply(v, inverse=False)

    def Winv(self, v):
        return self._apply(v, inverse=True)
