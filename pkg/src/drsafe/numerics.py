"""Small dense symmetric linear algebra.

Every routine accepts a single ``(d, d)`` matrix or a stack ``(..., d, d)``;
loops run over matrix indices, never over the stack, so checking thousands of
2x2 or 3x3 blocks costs a handful of numpy calls.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch, NotPDError

DEFAULT_TOL = 1e-9
_JACOBI_MAX_SWEEPS = 60


def symmetrize(a) -> np.ndarray:
    """Return ``(A + A^T) / 2``; the result is symmetric bit-for-bit."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {a.shape}")
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def cholesky(a, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Batched Cholesky factorization.

    Returns ``(L, ok)``. ``ok[...]`` is True where every pivot exceeded ``tol``.
    Rows of ``L`` past a failed pivot are meaningless.
    """
    a = symmetrize(a)
    d = a.shape[-1]
    L = np.zeros_like(a)
    ok = np.ones(a.shape[:-2], dtype=bool)
    for j in range(d):
        row = L[..., j, :j]
        pivot = a[..., j, j] - np.einsum("...k,...k->...", row, row)
        ok &= pivot > tol
        diag = np.sqrt(np.where(pivot > tol, pivot, 1.0))
        L[..., j, j] = diag
        if j + 1 < d:
            below = a[..., j + 1 :, j] - np.einsum("...ik,...k->...i", L[..., j + 1 :, :j], row)
            L[..., j + 1 :, j] = below / diag[..., None]
    return L, ok


def is_positive_definite(a, tol: float = DEFAULT_TOL):
    """True iff the Cholesky factorization succeeds with all pivots above ``tol``."""
    _, ok = cholesky(a, tol)
    return bool(ok) if ok.ndim == 0 else ok


def jacobi_eigenvalues(a, max_sweeps: int = _JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues (ascending) of symmetric matrices by cyclic Jacobi rotations."""
    a = symmetrize(a).copy()
    d = a.shape[-1]
    if d == 1:
        return a[..., 0, :].copy()
    scale = np.sqrt(np.einsum("...ij,...ij->...", a, a))
    for _ in range(max_sweeps):
        off = np.einsum("...ij,...ij->...", a, a) - np.einsum("...ii,...ii->...", a, a)
        if np.all(off <= (1e-30 * scale**2) + 1e-300):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[..., p, q]
                active = np.abs(apq) > 1e-300
                safe_apq = np.where(active, apq, 1.0)
                theta = (a[..., q, q] - a[..., p, p]) / (2.0 * safe_apq)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J = [[c, s], [-s, c]] on the (p, q) plane
                rp = a[..., p, :].copy()
                rq = a[..., q, :].copy()
                a[..., p, :] = c[..., None] * rp - s[..., None] * rq
                a[..., q, :] = s[..., None] * rp + c[..., None] * rq
                cp = a[..., :, p].copy()
                cq = a[..., :, q].copy()
                a[..., :, p] = c[..., None] * cp - s[..., None] * cq
                a[..., :, q] = s[..., None] * cp + c[..., None] * cq
    return np.sort(np.einsum("...ii->...i", a), axis=-1)


def min_eigenvalue(a):
    lam = jacobi_eigenvalues(a)[..., 0]
    return float(lam) if lam.ndim == 0 else lam


def spectral_norm(b) -> float:
    """Largest singular value, from the smaller of the two Gram matrices."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.size == 0:
        return 0.0
    gram = b.T @ b if b.shape[1] <= b.shape[0] else b @ b.T
    lam_max = jacobi_eigenvalues(gram)[..., -1]
    return float(np.sqrt(max(float(lam_max), 0.0)))


def solve_spd(a, b, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Raises NotPDError when the factorization hits a pivot at or below ``tol``.
    """
    L, ok = cholesky(a, tol)
    if not np.all(ok):
        raise NotPDError("matrix is not positive definite")
    b = np.asarray(b, dtype=float)
    d = L.shape[-1]
    if b.shape[-1] != d:
        raise DimensionMismatch(f"rhs has length {b.shape[-1]}, matrix is {d}x{d}")
    y = np.zeros_like(b)
    for i in range(d):
        y[..., i] = (b[..., i] - np.einsum("...k,...k->...", L[..., i, :i], y[..., :i])) / L[..., i, i]
    x = np.zeros_like(b)
    for i in reversed(range(d)):
        x[..., i] = (
            y[..., i] - np.einsum("...k,...k->...", L[..., i + 1 :, i], x[..., i + 1 :])
        ) / L[..., i, i]
    return x
