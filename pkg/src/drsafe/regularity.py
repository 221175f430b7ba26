"""Empirical point-Lipschitz estimates of the synthesized control law.

At a strictly feasible state ``x0`` the solution map ``x -> u*(x)`` satisfies
``||u*(x) - u*(x0)|| <= L ||x - x0||`` near ``x0``. We probe it on a ladder of
radii with deterministic quasi-random directions and report the largest
difference quotient per radius; a quotient that stays bounded as the radius
shrinks is the numerical signature of point-Lipschitzness. Solver accuracy
(~1e-8 on the controls) limits meaningful radii to about 1e-6.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .dro import SynthesisProblem
from .exceptions import AllProbesInfeasible, InfeasibleProbe
from .socp.solver import SolverOptions
from .socp.synthesis import Form, synthesize


def probe_strict_feasibility(p: SynthesisProblem, x=None, margin: float = 1e-4,
                             options: SolverOptions | None = None) -> bool:
    """True iff the program stays feasible with every sample cone tightened by ``margin``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return synthesize(p, x, form=Form.REDUCED, options=options, margin=margin).feasible


def sphere_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` unit vectors in R^n from a scrambled Sobol sequence, mapped through the normal quantile."""
    if count < 1:
        raise ValueError("need at least one direction")
    if n == 1:
        return np.where(np.arange(count) % 2 == 0, 1.0, -1.0)[:, None]
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    # draw a power-of-two block (keeps Sobol balance) and take its prefix
    pts = sampler.random_base2(max(0, (count - 1).bit_length()))[:count]
    gauss = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


@dataclass
class LipschitzReport:
    x0: np.ndarray
    radii: np.ndarray
    max_ratio_per_radius: np.ndarray
    directions_per_radius: int
    strictly_feasible: bool
    n_infeasible_per_radius: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    max_diff_per_radius: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def ratio_bounded(self, factor: float = 10.0) -> bool:
        """Ratio at the smallest radius is within ``factor`` of the median ratio."""
        finite = self.max_ratio_per_radius[np.isfinite(self.max_ratio_per_radius)]
        if finite.size == 0:
            return False
        return bool(self.max_ratio_per_radius[-1] <= factor * np.median(finite))

    def rows(self):
        for rho, ratio, bad in zip(self.radii, self.max_ratio_per_radius, self.n_infeasible_per_radius):
            yield {"radius": f"{rho:.9g}", "max_ratio": f"{ratio:.9g}", "n_infeasible_probes": int(bad)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["radius", "max_ratio", "n_infeasible_probes"])
            writer.writeheader()
            writer.writerows(self.rows())


def estimate_point_lipschitz(
    p: SynthesisProblem,
    x0,
    radii=(1e-2, 1e-3, 1e-4, 1e-5),
    dirs: int = 16,
    seed: int = 0,
    margin: float = 1e-4,
    options: SolverOptions | None = None,
    workers: int = 1,
) -> LipschitzReport:
    """Largest ``||u*(x0 + rho d) - u*(x0)|| / rho`` over ``dirs`` directions, per radius.

    Infeasible probes are counted and left out of the maximum. Raises
    InfeasibleProbe if ``x0`` itself is infeasible and AllProbesInfeasible if
    no probe solved.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    base = synthesize(p, x0, options=options)
    if not base.feasible:
        raise InfeasibleProbe(f"program is {base.status.value} at the base state")
    strict = probe_strict_feasibility(p, x0, margin, options)
    directions = sphere_directions(x0.size, dirs, seed)
    probes = [(rho, d) for rho in radii for d in directions]

    def solve_probe(job):
        rho, d = job
        res = synthesize(p, x0 + rho * d, options=options)
        return None if not res.feasible else float(np.linalg.norm(res.u - base.u))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            diffs = list(pool.map(solve_probe, probes))
    else:
        diffs = [solve_probe(job) for job in probes]

    ratios = np.full(radii.size, np.nan)
    worst = np.full(radii.size, np.nan)
    infeasible = np.zeros(radii.size, dtype=int)
    for j, rho in enumerate(radii):
        chunk = diffs[j * dirs:(j + 1) * dirs]
        ok = [v for v in chunk if v is not None]
        infeasible[j] = len(chunk) - len(ok)
        if ok:
            worst[j] = max(ok)
            ratios[j] = worst[j] / rho
    if np.all(infeasible == dirs):
        raise AllProbesInfeasible("every probe around the base state was infeasible")
    return LipschitzReport(x0, radii, ratios, dirs, strict, infeasible, worst)
