"""Uncertain control-affine models and the affine constraint data built from them.

The dynamics are ``xdot = (F(x) + sum_j W_j(x) xi_j) @ [1, u]``. A barrier or
Lyapunov function turns them into a scalar constraint

    G(x, u_ext, xi) = u_ext @ q(x) + u_ext @ R(x) @ xi <= 0

which is what every downstream module consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionMismatch

MatrixField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class UncertainAffineModel:
    n: int
    m: int
    F: MatrixField
    W: tuple[MatrixField, ...]
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "W", tuple(self.W))

    @property
    def k(self) -> int:
        return len(self.W)

    def nominal(self, x) -> np.ndarray:
        out = np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float)
        if out.shape != (self.n, self.m + 1):
            raise DimensionMismatch(f"F(x) has shape {out.shape}, expected {(self.n, self.m + 1)}")
        return out

    def perturbations(self, x) -> np.ndarray:
        """Stack of the ``W_j(x)``, shape ``(k, n, m+1)``."""
        x = np.asarray(x, dtype=float)
        if not self.W:
            return np.zeros((0, self.n, self.m + 1))
        out = np.stack([np.asarray(w(x), dtype=float) for w in self.W])
        if out.shape[1:] != (self.n, self.m + 1):
            raise DimensionMismatch(f"W_j(x) has shape {out.shape[1:]}, expected {(self.n, self.m + 1)}")
        return out

    def vector_field(self, x, u, xi) -> np.ndarray:
        u_ext = ext_control(u)
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.shape[0] != self.k:
            raise DimensionMismatch(f"xi has length {xi.shape[0]}, model has k={self.k}")
        A = self.nominal(x)
        if self.k:
            A = A + np.tensordot(xi, self.perturbations(x), axes=1)
        return A @ u_ext


def ext_control(u) -> np.ndarray:
    """Prepend the constant 1 that multiplies the drift column."""
    return np.concatenate([[1.0], np.asarray(u, dtype=float).reshape(-1)])


class CertificateKind(str, Enum):
    BARRIER = "barrier"
    LYAPUNOV = "lyapunov"


def linear_class_k(gain: float = 1.0) -> Callable[[float], float]:
    if gain <= 0:
        raise ValueError("class-K gain must be positive")
    return lambda s: gain * s


@dataclass(frozen=True)
class CertificateFunction:
    """A CBF (``kind=BARRIER``, safe set ``h >= 0``) or a CLF (``kind=LYAPUNOV``)."""

    kind: CertificateKind
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    class_k: Callable[[float], float] = field(default_factory=linear_class_k)
    label: str = ""


@dataclass(frozen=True)
class ConstraintData:
    q: np.ndarray
    R: np.ndarray
    label: str = ""

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        R = np.asarray(self.R, dtype=float)
        if R.ndim == 1:
            R = R.reshape(q.shape[0], -1)
        if R.shape[0] != q.shape[0]:
            raise DimensionMismatch(f"R has {R.shape[0]} rows, q has length {q.shape[0]}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(R))):
            raise ValueError("constraint data must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "R", R)

    @property
    def m(self) -> int:
        return self.q.shape[0] - 1

    @property
    def k(self) -> int:
        return self.R.shape[1]


def assemble_constraint(model: UncertainAffineModel, cert: CertificateFunction, x) -> ConstraintData:
    """Chain-rule the certificate through the model into ``(q, R)``, oriented as ``G <= 0``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    grad = np.asarray(cert.gradient(x), dtype=float).reshape(-1)
    if grad.shape[0] != model.n:
        raise DimensionMismatch(f"gradient has length {grad.shape[0]}, model has n={model.n}")
    rate = float(cert.class_k(float(cert.value(x))))
    e1 = np.zeros(model.m + 1)
    e1[0] = 1.0
    q = model.nominal(x).T @ grad + rate * e1
    R = np.einsum("jna,n->aj", model.perturbations(x), grad) if model.k else np.zeros((model.m + 1, 0))
    if cert.kind is CertificateKind.BARRIER:
        # hdot >= -alpha(h)  <=>  -(grad h . xdot + alpha(h)) <= 0
        q, R = -q, -R
    return ConstraintData(q=q, R=R, label=cert.label or cert.kind.value)


def eval_G(c: ConstraintData, u_ext, xi) -> float:
    u_ext = np.asarray(u_ext, dtype=float).reshape(-1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if u_ext.shape[0] != c.q.shape[0] or xi.shape[0] != c.k:
        raise DimensionMismatch(
            f"expected u_ext of length {c.q.shape[0]} and xi of length {c.k}, "
            f"got {u_ext.shape[0]} and {xi.shape[0]}"
        )
    return float(u_ext @ c.q + u_ext @ (c.R @ xi))


def unicycle_model(a: float = 0.05) -> UncertainAffineModel:
    """Off-axis unicycle with drift, turn-rate and actuation perturbations.

    State ``(x1, x2, theta)`` is the point at distance ``a`` ahead of the wheel
    axis, which makes the position relative-degree one in ``(v, omega)``.
    """
    if a <= 0:
        raise ValueError("off-axis distance must be positive")

    def F(x):
        c, s = np.cos(x[2]), np.sin(x[2])
        return np.array([[0.0, c, -a * s], [0.0, s, a * c], [0.0, 0.0, 1.0]])

    def W1(x):
        return np.array([[0.02, 0.0, 0.0], [0.02, 0.0, 0.0], [0.01, 0.0, 0.0]])

    def W2(x):
        return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -0.02]])

    def W3(x):
        c, s = np.cos(x[2]), np.sin(x[2])
        return np.array([[0.0, 0.02 * c, -0.02 * a * s], [0.0, 0.02 * s, 0.02 * a * c], [0.0, 0.0, 0.0]])

    return UncertainAffineModel(n=3, m=2, F=F, W=(W1, W2, W3), name=f"unicycle(a={a})")


def quadratic_clf(goal: Sequence[float], n: int, gain: float = 1.0) -> CertificateFunction:
    """``V(x) = ||x[:len(goal)] - goal||^2`` with a linear decay rate."""
    goal = np.asarray(goal, dtype=float)
    p = goal.shape[0]

    def value(x):
        d = np.asarray(x)[:p] - goal
        return float(d @ d)

    def gradient(x):
        g = np.zeros(n)
        g[:p] = 2.0 * (np.asarray(x)[:p] - goal)
        return g

    return CertificateFunction(CertificateKind.LYAPUNOV, value, gradient, linear_class_k(gain), "clf")


def disk_cbf(center: Sequence[float], radius: float, n: int, gain: float = 1.0) -> CertificateFunction:
    """``h(x) = ||x[:2] - center||^2 - radius^2``; safe outside the disk."""
    center = np.asarray(center, dtype=float)
    p = center.shape[0]

    def value(x):
        d = np.asarray(x)[:p] - center
        return float(d @ d - radius**2)

    def gradient(x):
        g = np.zeros(n)
        g[:p] = 2.0 * (np.asarray(x)[:p] - center)
        return g

    return CertificateFunction(CertificateKind.BARRIER, value, gradient, linear_class_k(gain), "cbf")
