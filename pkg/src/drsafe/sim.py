"""Closed-loop simulation of the uncertain unicycle under the DRO controller.

Each step checks the configured feasibility certificates, solves the DRO
program at the current state and applies the result for one RK4 step under a
freshly drawn true disturbance. When the program is infeasible the robot
applies zero input, collects more samples, and the Wasserstein radius drops to
the confidence radius of the enlarged sample set (and the risk level to 1/N if
needed, keeping ``eps <= 1/N``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .dro import AmbiguityConfig, SampleSet, SynthesisProblem, radius_schedule
from .exceptions import ConfigError, DrsafeError
from .feasibility import SlackCertificate, check_necessary, check_sufficient_single, check_sufficient_slack
from .model import UncertainAffineModel, assemble_constraint, disk_cbf, quadratic_clf, unicycle_model
from .socp.solver import Status
from .socp.synthesis import synthesize
from .svgplot import path_plot

# distribution name, two parameters; the normal is given by (mean, variance)
PAPER_SAMPLER = (("normal", 0.5, 1.0), ("uniform", -1.0, 1.0), ("beta", 2.0, 0.2))
CHECKERS = ("necessary", "sufficient1", "sufficient3")


def draw_rows(rng: np.random.Generator, spec, count: int) -> np.ndarray:
    cols = []
    for entry in spec:
        name, p1, p2 = entry
        if name == "normal":
            cols.append(rng.normal(p1, math.sqrt(p2), size=count))
        elif name == "uniform":
            cols.append(rng.uniform(p1, p2, size=count))
        elif name == "beta":
            cols.append(rng.beta(p1, p2, size=count))
        else:
            raise ConfigError(f"unknown distribution {name!r}")
    return np.column_stack(cols)


def sample_uncertainty(spec=PAPER_SAMPLER, count: int = 1, seed=0) -> SampleSet:
    """``count`` i.i.d. draws, one column per ``(distribution, p1, p2)`` entry of ``spec``.

    ``seed`` may be an integer or a ``numpy.random.Generator`` (which is advanced).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SampleSet(draw_rows(rng, spec, count))


def step(model: UncertainAffineModel, state, u, dt: float, xi_true) -> np.ndarray:
    """One classical Runge-Kutta step with the disturbance held constant."""
    x = np.asarray(state, dtype=float)

    def f(y):
        return model.vector_field(y, u, xi_true)

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def go_to_goal(goal, k_v: float = 1.0, k_w: float = 1.0):
    """Nominal extended control ``[1, v, omega]`` steering the point towards ``goal``."""
    goal = np.asarray(goal, dtype=float)

    def nominal(x):
        err = goal - x[:2]
        heading = np.array([math.cos(x[2]), math.sin(x[2])])
        v = k_v * float(heading @ err)
        w = k_w * wrap_angle(math.atan2(err[1], err[0]) - x[2])
        return np.array([1.0, v, w])

    return nominal


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 1
    goal: tuple = (7.0, 7.0)
    obstacle_center: tuple = (3.0, 2.0)
    obstacle_radius: float = 1.0
    x0: tuple = (0.0, 0.0, 0.0)
    a: float = 0.05
    dt: float = 0.02
    horizon: int = 500
    eps: float = 0.01
    eps_bar: float = 0.1
    r0: float = 0.5
    N0: int = 3
    c1: float = 2.0
    c2: float = 10.0
    tail_a: float = 2.0
    sampler: tuple = PAPER_SAMPLER
    batch: int = 1
    redraw_every: int = 1
    seed: int = 0
    k_v: float = 1.0
    k_w: float = 1.0
    clf_gain: float = 0.1
    cbf_gain: float = 2.0
    control_bound: float | None = 10.0
    checkers: tuple = ("necessary",)
    require_invertible: bool = False
    slack: tuple | None = None
    slack_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sampler", tuple(tuple(e) for e in self.sampler))
        object.__setattr__(self, "checkers", tuple(self.checkers))
        if self.M not in (1, 2):
            raise ConfigError("M must be 1 (goal only) or 2 (goal and obstacle)")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.N0 < 1 or self.batch < 1 or self.redraw_every < 1:
            raise ConfigError("N0, batch and redraw_every must be at least 1")
        if len(self.sampler) != 3:
            raise ConfigError("the unicycle has three uncertainty components")
        if len(self.x0) != 3 or len(self.goal) != 2:
            raise ConfigError("x0 needs 3 entries and goal 2")
        for c in self.checkers:
            if c not in CHECKERS:
                raise ConfigError(f"unknown checker {c!r}; choose from {CHECKERS}")
        if "sufficient3" in self.checkers and self.slack is None:
            raise ConfigError("the slack checker needs `slack` values")
        if "sufficient1" in self.checkers and self.M != 1:
            raise ConfigError("the single-constraint checker needs M = 1")
        if self.eps > 1.0 / self.N0:
            raise ConfigError("eps must not exceed 1/N0")
        AmbiguityConfig(r=self.r0, eps=self.eps, eps_bar=self.eps_bar, c1=self.c1, c2=self.c2, a=self.tail_a, k=3)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("goal", "obstacle_center", "x0", "checkers", "slack"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        if "sampler" in data:
            data["sampler"] = tuple(tuple(e) for e in data["sampler"])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def paper_scenario(M: int = 1, **overrides) -> ScenarioConfig:
    """Goal (7, 7) for ``M = 1``; goal (5, 5) with the obstacle at (3, 2), radius 1, for ``M = 2``."""
    base = ScenarioConfig(M=M, goal=(7.0, 7.0) if M == 1 else (5.0, 5.0))
    return replace(base, **overrides)


@dataclass
class ScenarioSetup:
    model: UncertainAffineModel
    clf: object
    cbf: object | None
    problem: SynthesisProblem


def build_scenario(cfg: ScenarioConfig, samples: SampleSet | None = None) -> ScenarioSetup:
    """Model, certificates and a state-dependent synthesis problem for ``cfg``."""
    model = unicycle_model(cfg.a)
    clf = quadratic_clf(cfg.goal, model.n, cfg.clf_gain)
    certs = [clf]
    cbf = None
    if cfg.M == 2:
        cbf = disk_cbf(cfg.obstacle_center, cfg.obstacle_radius, model.n, cfg.cbf_gain)
        certs.append(cbf)
    constraints = [lambda x, c=c: assemble_constraint(model, c, x) for c in certs]
    if samples is None:
        samples = sample_uncertainty(cfg.sampler, cfg.N0, np.random.default_rng([cfg.seed, 0]))
    amb = AmbiguityConfig(r=cfg.r0, eps=cfg.eps, eps_bar=cfg.eps_bar, c1=cfg.c1, c2=cfg.c2, a=cfg.tail_a, k=3)
    problem = SynthesisProblem(constraints, go_to_goal(cfg.goal, cfg.k_v, cfg.k_w), amb, samples,
                               control_bound=cfg.control_bound)
    return ScenarioSetup(model, clf, cbf, problem)


LOG_COLUMNS = [
    "t", "x1", "x2", "theta", "v", "omega", "status", "N", "r", "eps", "solve_time",
    "necessary", "necessary_time", "sufficient1", "sufficient1_time", "sufficient3", "sufficient3_time",
    "h", "V",
]


@dataclass
class StepRecord:
    t: float
    state: np.ndarray
    u: np.ndarray  # NaN when no control was synthesized
    status: str  # solver status, "" for the final state
    N: int
    r: float
    eps: float
    solve_time: float = float("nan")
    verdicts: dict = field(default_factory=dict)  # checker -> (verdict, seconds)
    h: float = float("nan")
    V: float = float("nan")

    def row(self) -> list:
        out = [f"{self.t:.9g}", *(f"{v:.17g}" for v in self.state), *(f"{v:.17g}" for v in self.u),
               self.status, self.N, f"{self.r:.17g}", f"{self.eps:.17g}", f"{self.solve_time:.6g}"]
        for name in CHECKERS:
            verdict, secs = self.verdicts.get(name, ("", float("nan")))
            out += [verdict, f"{secs:.6g}"]
        out += [f"{self.h:.17g}", f"{self.V:.17g}"]
        return out


@dataclass
class TrajectoryLog:
    config: ScenarioConfig
    records: list
    samples: SampleSet | None = None  # final (append-only) sample set; record i used its first N rows

    def problem_at(self, index: int) -> SynthesisProblem:
        """The synthesis problem solved at record ``index``."""
        rec = self.records[index]
        samples = SampleSet(self.samples.samples[: rec.N])
        return build_scenario(self.config, samples).problem.with_ambiguity(r=rec.r, eps=rec.eps)

    @property
    def states(self) -> np.ndarray:
        return np.array([rec.state for rec in self.records])

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    def final_distance(self) -> float:
        return float(np.linalg.norm(self.records[-1].state[:2] - np.asarray(self.config.goal)))

    def min_barrier(self) -> float:
        """Smallest barrier value along the path (NaN without an obstacle)."""
        hs = np.array([rec.h for rec in self.records])
        return float(np.nanmin(hs)) if np.any(np.isfinite(hs)) else float("nan")

    def mirror_violations(self) -> int:
        """Steps the necessary check certified infeasible but the solver still solved."""
        return sum(
            1 for rec in self.records
            if rec.verdicts.get("necessary", ("",))[0] == "CertifiedInfeasible" and rec.status == Status.OPTIMAL.value
        )

    def to_csv(self, path, timings: bool = True) -> None:
        """Write the log; ``timings=False`` blanks wall-clock columns for byte-identical reruns."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_COLUMNS)
            for rec in self.records:
                row = rec.row()
                if not timings:
                    for col in ("solve_time", "necessary_time", "sufficient1_time", "sufficient3_time"):
                        row[LOG_COLUMNS.index(col)] = ""
                writer.writerow(row)

    def to_svg(self, path) -> None:
        """The x1-x2 path with the goal and, for M = 2, the obstacle."""
        cfg = self.config
        circles = [(cfg.obstacle_center, cfg.obstacle_radius)] if cfg.M == 2 else []
        path_plot(self.states[:, :2], path, title=f"closed loop, M={cfg.M}, seed={cfg.seed}",
                  goal=cfg.goal, circles=circles)


def _run_checkers(cfg: ScenarioConfig, p: SynthesisProblem, x) -> dict:
    out = {}
    for name in cfg.checkers:
        try:
            if name == "necessary":
                v = check_necessary(p, x, require_invertible=cfg.require_invertible)
            elif name == "sufficient1":
                v = check_sufficient_single(p, x, require_invertible=cfg.require_invertible)
            else:
                bound = cfg.slack_bound
                if bound is None:
                    bound = math.sqrt(1.0 + cfg.control_bound**2) if cfg.control_bound is not None else 1.0
                v = check_sufficient_slack(p, x, SlackCertificate(cfg.slack, bound))
            out[name] = (v.kind.value, v.elapsed)
        except DrsafeError as exc:
            out[name] = (f"Error:{type(exc).__name__}", float("nan"))
    return out


def run_closed_loop(cfg: ScenarioConfig) -> TrajectoryLog:
    """Simulate ``cfg.horizon`` steps; the log holds one record per visited state."""
    rng_samples = np.random.default_rng([cfg.seed, 1])
    rng_truth = np.random.default_rng([cfg.seed, 2])
    setup = build_scenario(cfg)
    model, p = setup.model, setup.problem
    x = np.asarray(cfg.x0, dtype=float)
    r, eps = cfg.r0, cfg.eps
    xi_true = draw_rows(rng_truth, cfg.sampler, 1)[0]
    records = []

    def record(t, x_, u, status, solve_time=float("nan"), verdicts=None):
        h = setup.cbf.value(x_) if setup.cbf is not None else float("nan")
        records.append(StepRecord(t, x_.copy(), u, status, p.N, r, eps, solve_time, verdicts or {},
                                  h, setup.clf.value(x_)))

    for j in range(cfg.horizon):
        t = j * cfg.dt
        verdicts = _run_checkers(cfg, p, x)
        try:
            res = synthesize(p, x)
            status, solve_time = res.status, res.wall_time
        except DrsafeError:
            res, status, solve_time = None, Status.NUMERICAL_FAILURE, float("nan")
        if res is not None and res.feasible:
            u = res.u
        else:
            u = np.full(model.m, np.nan)
        record(t, x, u, status.value, solve_time, verdicts)
        if j % cfg.redraw_every == 0 and j > 0:
            xi_true = draw_rows(rng_truth, cfg.sampler, 1)[0]
        applied = np.zeros(model.m) if np.any(np.isnan(u)) else u
        x = step(model, x, applied, cfg.dt, xi_true)
        if status is Status.INFEASIBLE:
            p = p.with_samples(p.samples.append(draw_rows(rng_samples, cfg.sampler, cfg.batch)))
            r = min(r, radius_schedule(p.N, p.ambiguity, k=3))
            eps = min(eps, 1.0 / p.N)
            p = p.with_ambiguity(r=r, eps=eps)
    record(cfg.horizon * cfg.dt, x, np.full(model.m, np.nan), "")
    return TrajectoryLog(cfg, records, p.samples)
