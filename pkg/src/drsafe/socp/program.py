"""Standard-form cone programs.

    minimize    c @ x
    subject to  b - A @ x  in  K = K_1 x ... x K_p

where each ``K_j`` is a nonnegative orthant or a second-order cone
``{(s0, s1) : s0 >= ||s1||}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..exceptions import DimensionMismatch

FORMAT_HEADER = "# drsafe cone program v1"


class ConeKind(str, Enum):
    NONNEG = "L"
    SOC = "Q"


@dataclass(frozen=True)
class Cone:
    kind: ConeKind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("cone dimension must be at least 1")

    @classmethod
    def nonneg(cls, dim: int = 1) -> "Cone":
        return cls(ConeKind.NONNEG, dim)

    @classmethod
    def soc(cls, dim: int) -> "Cone":
        return cls(ConeKind.SOC, dim)


@dataclass
class ConeProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: list[Cone]
    var_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(self.b.shape[0], self.c.shape[0])
        self.cones = list(self.cones)
        if sum(cone.dim for cone in self.cones) != self.A.shape[0]:
            raise DimensionMismatch("cone dimensions do not add up to the number of rows of A")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    @property
    def n_cones(self) -> int:
        return len(self.cones)

    def count(self, kind: ConeKind) -> int:
        return sum(1 for cone in self.cones if cone.kind is kind)

    def blocks(self):
        """Yield ``(cone, row_slice)`` pairs."""
        start = 0
        for cone in self.cones:
            yield cone, slice(start, start + cone.dim)
            start += cone.dim

    def slack(self, x) -> np.ndarray:
        return self.b - self.A @ np.asarray(x, dtype=float)

    def grouped_rows(self):
        """``(orthant_rows, {dim: (count, dim) row indices})``; second-order blocks grouped by size."""
        lp, groups = [], {}
        for cone, rows in self.blocks():
            idx = np.arange(rows.start, rows.stop)
            if cone.kind is ConeKind.NONNEG or cone.dim == 1:
                lp.extend(idx)
            else:
                groups.setdefault(cone.dim, []).append(idx)
        return np.array(lp, dtype=int), {d: np.array(v, dtype=int) for d, v in sorted(groups.items())}

    def cone_violation(self, s) -> float:
        """Largest distance-to-membership proxy over all blocks (0 when ``s`` is in K)."""
        s = np.asarray(s, dtype=float)
        lp, groups = self.grouped_rows()
        worst = float(np.max(-s[lp], initial=0.0))
        for idx in groups.values():
            blk = s[idx]
            worst = max(worst, float(np.max(np.linalg.norm(blk[:, 1:], axis=1) - blk[:, 0], initial=0.0)))
        return worst

    # -- plain-text dump/load -------------------------------------------------

    def dumps(self) -> str:
        lines = [
            FORMAT_HEADER,
            f"dims {self.n_vars} {self.n_rows}",
            f"cones {len(self.cones)}",
        ]
        lines += [f"{cone.kind.value} {cone.dim}" for cone in self.cones]
        lines.append("A")
        lines += [" ".join(repr(float(v)) for v in row) for row in self.A]
        lines.append("b")
        lines += [repr(float(v)) for v in self.b]
        lines.append("c")
        lines += [repr(float(v)) for v in self.c]
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "ConeProgram":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        it = iter(lines)

        def expect(tag):
            parts = next(it).split()
            if parts[0] != tag:
                raise ValueError(f"expected '{tag}' section, got '{parts[0]}'")
            return parts[1:]

        n_vars, n_rows = (int(v) for v in expect("dims"))
        (n_cones,) = (int(v) for v in expect("cones"))
        cones = []
        for _ in range(n_cones):
            kind, dim = next(it).split()
            cones.append(Cone(ConeKind(kind), int(dim)))
        expect("A")
        A = np.array([[float(v) for v in next(it).split()] for _ in range(n_rows)]).reshape(n_rows, n_vars)
        expect("b")
        b = np.array([float(next(it)) for _ in range(n_rows)])
        expect("c")
        c = np.array([float(next(it)) for _ in range(n_vars)])
        return cls(c=c, A=A, b=b, cones=cones)

    @classmethod
    def load(cls, path) -> "ConeProgram":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
