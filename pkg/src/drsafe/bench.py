"""Timing harness: feasibility certificates versus the cone solver.

Every (N, M) configuration draws one instance and times the four methods on
it: the necessary check, the single-constraint sufficient check (M = 1 only),
the sample-free slack check and the interior-point solver on the epigraph form
of the program, whose size grows with N. A timing is the median over repeats
of the per-call wall time, after one untimed warm-up call.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dro import AmbiguityConfig, SampleSet, SynthesisProblem, radius_schedule
from .exceptions import DrsafeError, NoPairs
from .feasibility import SlackCertificate, check_necessary, check_sufficient_single, check_sufficient_slack
from .model import ConstraintData
from .sim import draw_rows
from .socp.synthesis import Form, synthesize
from .svgplot import line_chart

METHODS = ("Necessary", "SufficientSingle", "SufficientSlack", "Solver")
BENCH_COLUMNS = ["scenario", "N", "M", "m", "k", "method", "verdict", "time_s", "repeats"]
STANDARD_NORMAL = "standard_normal"


@dataclass(frozen=True)
class BenchRecord:
    scenario: str
    N: int
    M: int
    m: int
    k: int
    method: str
    verdict: str
    time_s: float
    repeats: int

    def row(self, timings: bool = True) -> list:
        return [self.scenario, self.N, self.M, self.m, self.k, self.method, self.verdict,
                f"{self.time_s:.6g}" if timings else "", self.repeats]


def write_csv(records, path, timings: bool = True) -> None:
    """``timings=False`` blanks the time column, leaving a byte-reproducible file."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        writer.writerows(rec.row(timings) for rec in records)


def read_csv(path) -> list[BenchRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            BenchRecord(r["scenario"], int(r["N"]), int(r["M"]), int(r["m"]), int(r["k"]), r["method"],
                        r["verdict"], float(r["time_s"]) if r["time_s"] else float("nan"), int(r["repeats"]))
            for r in csv.DictReader(fh)
        ]


# -- instances -----------------------------------------------------------------


@dataclass(frozen=True)
class BenchTemplate:
    """Fixed constraint data; a sweep only varies the samples and the number of constraints.

    ``r=None`` takes the confidence radius ``r_N(eps_bar)`` of each sample
    size, ``eps=None`` takes ``1/N``. ``sampler`` is ``"standard_normal"`` or
    a list of ``(distribution, p1, p2)`` entries as in :mod:`drsafe.sim`.
    """

    constraints: tuple
    nominal: np.ndarray
    r: float | None = None
    eps: float | None = None
    eps_bar: float = 0.1
    c1: float = 2.0
    c2: float = 1.0
    a: float = 2.0
    sampler: object = STANDARD_NORMAL
    slack: tuple | None = None
    slack_bound: float | None = None
    control_bound: float | None = None
    require_invertible: bool = False
    name: str = "bench"

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "nominal", np.asarray(self.nominal, dtype=float).reshape(-1))
        if not self.constraints:
            raise ValueError("a template needs at least one constraint")

    @property
    def m(self) -> int:
        return self.constraints[0].m

    @property
    def k(self) -> int:
        return self.constraints[0].k

    @classmethod
    def from_problem(cls, p: SynthesisProblem, x=None, **overrides) -> "BenchTemplate":
        """Freeze a (possibly state-dependent) problem at ``x``."""
        amb = p.ambiguity
        base = dict(constraints=tuple(p.constraints_at(x)), nominal=p.nominal_at(x), r=amb.r, eps=None,
                    eps_bar=amb.eps_bar, c1=amb.c1, c2=amb.c2, a=amb.a, control_bound=p.control_bound)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def random(cls, m: int = 2, k: int = 3, M: int = 1, seed: int = 0, noise: float = 1e-3,
               **overrides) -> "BenchTemplate":
        """Constraints that are active but satisfiable: the nominal control violates them,
        while the control ``-q_u`` has a margin.

        With ``eps = 1/N`` the sample cones weigh the norm term by ``r N``,
        which grows with N under the confidence-radius schedule; a small
        ``noise`` scale on ``R`` keeps the instances feasible up to N ~ 1e4.
        """
        rng = np.random.default_rng([seed, 7])
        cons = []
        for l in range(M):
            q_u = rng.normal(size=m)
            q_u /= np.linalg.norm(q_u)
            q0 = -1.0 - rng.uniform(0.0, 1.0)
            R = noise * rng.normal(size=(m + 1, k))
            cons.append(ConstraintData(q=np.r_[q0, q_u], R=R, label=f"c{l}"))
        nominal = np.r_[1.0, 3.0 * cons[0].q[1:]]
        base = dict(constraints=tuple(cons), nominal=nominal, slack=tuple([0.5] * M), name=f"random{seed}")
        base.update(overrides)
        return cls(**base)

    def draw_samples(self, N: int, rng: np.random.Generator) -> SampleSet:
        if isinstance(self.sampler, str):
            if self.sampler != STANDARD_NORMAL:
                raise ValueError(f"unknown sampler {self.sampler!r}")
            return SampleSet(rng.standard_normal((N, self.k)))
        return SampleSet(draw_rows(rng, self.sampler, N))

    def instance(self, N: int, M: int, rng: np.random.Generator) -> SynthesisProblem:
        if not 1 <= M <= len(self.constraints):
            raise ValueError(f"template has {len(self.constraints)} constraints, asked for M={M}")
        samples = self.draw_samples(N, rng)
        probe = AmbiguityConfig(r=0.0, eps=1.0 / N, eps_bar=self.eps_bar, c1=self.c1, c2=self.c2, a=self.a,
                                k=self.k)
        r = radius_schedule(N, probe) if self.r is None else self.r
        eps = 1.0 / N if self.eps is None else min(self.eps, 1.0 / N)
        amb = replace(probe, r=r, eps=eps)
        return SynthesisProblem(self.constraints[:M], self.nominal, amb, samples, control_bound=self.control_bound)

    def slack_certificate(self, M: int) -> SlackCertificate:
        S = self.slack if self.slack is not None else (1.0,) * len(self.constraints)
        B = self.slack_bound if self.slack_bound is not None else float(np.linalg.norm(self.nominal))
        return SlackCertificate(tuple(S[:M]), max(B, 1.0))


def random_problem(rng: np.random.Generator, m: int | None = None, k: int | None = None, N: int | None = None,
                   M: int | None = None, m_max: int = 3, k_max: int = 3, N_max: int = 10,
                   M_max: int = 2) -> SynthesisProblem:
    """A random instance mixing generic constraints with structured ones.

    Structured variants: controls absent from the norm term, a rank-one
    control block, and ``q_u`` in the range of the control block. The radius
    is zero one time in ten.
    """
    m = int(rng.integers(1, m_max + 1)) if m is None else m
    k = int(rng.integers(1, k_max + 1)) if k is None else k
    N = int(rng.integers(1, N_max + 1)) if N is None else N
    M = int(rng.integers(1, M_max + 1)) if M is None else M
    scale = float(rng.choice([0.3, 1.0, 3.0]))
    cons = []
    for _ in range(M):
        R = rng.normal(size=(m + 1, k))
        kind = int(rng.integers(0, 4))
        if kind == 1:
            R[1:] = 0.0
        elif kind == 2 and m > 1:
            R[1:] = np.outer(rng.normal(size=m), rng.normal(size=k))
        q = rng.normal(size=m + 1) * scale
        if kind == 3:
            q[1:] = R[1:] @ rng.normal(size=k)
        cons.append(ConstraintData(q=q, R=R))
    r = 0.0 if rng.uniform() < 0.1 else float(rng.uniform(0.05, 1.5))
    amb = AmbiguityConfig(r=r, eps=1.0 / N, k=k)
    return SynthesisProblem(cons, np.r_[1.0, rng.normal(size=m)], amb, SampleSet(rng.normal(size=(N, k))))


# -- timing --------------------------------------------------------------------


def _run_method(method: str, p: SynthesisProblem, template: BenchTemplate | None, require_invertible: bool):
    """One call of ``method``; returns its verdict string."""
    if method == "Necessary":
        return check_necessary(p, require_invertible=require_invertible).kind.value
    if method == "SufficientSingle":
        return check_sufficient_single(p, require_invertible=require_invertible).kind.value
    if method == "SufficientSlack":
        cert = template.slack_certificate(p.M) if template is not None else SlackCertificate((1.0,) * p.M, 1.0)
        return check_sufficient_slack(p, None, cert).kind.value
    if method == "Solver":
        return synthesize(p, form=Form.EPIGRAPH).status.value
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def _call(method, p, template, require_invertible) -> str:
    try:
        return _run_method(method, p, template, require_invertible)
    except DrsafeError as exc:
        return f"Error:{type(exc).__name__}"


def time_method(method: str, p: SynthesisProblem, repeats: int = 5, template: BenchTemplate | None = None,
                require_invertible: bool = False, min_time: float = 2e-3) -> tuple[str, float]:
    """Median per-call seconds over ``repeats`` timed repeats, after one untimed warm-up call.

    Fast methods are called in a loop within each repeat until the repeat
    lasts ``min_time``, so clock resolution does not dominate. Raises
    RuntimeError if the verdict changes between calls.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    start = time.perf_counter()
    verdict = _call(method, p, template, require_invertible)
    first = time.perf_counter() - start
    number = 1 if first >= min_time else max(1, int(math.ceil(min_time / max(first, 1e-7))))
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(number):
            v = _call(method, p, template, require_invertible)
        samples.append((time.perf_counter() - start) / number)
        if v != verdict:
            raise RuntimeError(f"{method} changed its verdict between calls: {verdict} -> {v}")
    return verdict, float(np.median(samples))


def run_sweep(base, Ns, Ms, repeats: int = 5, seed: int = 0, methods=METHODS, x=None,
              workers: int = 1, min_time: float = 2e-3) -> list[BenchRecord]:
    """Time every method on one instance per ``(N, M)``.

    ``base`` is a :class:`BenchTemplate` or a :class:`SynthesisProblem` (frozen
    at ``x``). Instances depend only on ``(seed, N, M)``. The single-constraint
    check is skipped for ``M > 1``. The slack check runs at ``r <= r_N``, as
    its guarantee requires. Configurations may run on ``workers`` threads;
    on a machine with fewer cores than workers the timings interfere.
    """
    if repeats < 3:
        raise ValueError("repeats must be at least 3")
    for meth in methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}; choose from {METHODS}")
    template = base if isinstance(base, BenchTemplate) else BenchTemplate.from_problem(base, x)
    configs = [(int(N), int(M)) for M in Ms for N in Ns]

    def job(cfg):
        N, M = cfg
        p = template.instance(N, M, np.random.default_rng([seed, N, M]))
        out = []
        for meth in methods:
            if meth == "SufficientSingle" and M != 1:
                continue
            q = p
            if meth == "SufficientSlack":
                q = p.with_ambiguity(r=min(p.ambiguity.r, radius_schedule(N, p.ambiguity, k=p.samples.k)))
            verdict, secs = time_method(meth, q, repeats, template, template.require_invertible, min_time)
            out.append(BenchRecord(template.name, N, M, template.m, template.k, meth, verdict, secs, repeats))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, configs))
    else:
        chunks = [job(cfg) for cfg in configs]
    return [rec for chunk in chunks for rec in chunk]


def run_random_suite(count: int, seed: int = 0, require_invertible: bool = False, **bounds) -> list[BenchRecord]:
    """Untimed verdicts of every applicable method on ``count`` random instances.

    Records of one instance share the scenario id ``rand<j>``; ``bounds`` are
    forwarded to :func:`random_problem`.
    """
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        p = random_problem(rng, **bounds)
        m, k = p.constraints_at(None)[0].m, p.samples.k
        for meth in ("Necessary", "SufficientSingle", "Solver"):
            if meth == "SufficientSingle" and p.M != 1:
                continue
            start = time.perf_counter()
            verdict = _run_method(meth, p, None, require_invertible) if meth != "Solver" else \
                synthesize(p).status.value
            out.append(BenchRecord(f"rand{j}", p.N, p.M, m, k, meth, verdict, time.perf_counter() - start, 1))
    return out


# -- summaries -----------------------------------------------------------------


@dataclass
class PrecisionSummary:
    """``precision`` = flagged-and-infeasible / solver-infeasible (None when nothing was infeasible)."""

    pairs: int
    solver_infeasible: int
    flagged: int
    precision: float | None
    undetermined: int
    not_applicable: int
    soundness_violations: int
    sufficient_violations: int = 0
    counts: dict = field(default_factory=dict)

    @property
    def precision_text(self) -> str:
        return "NA" if self.precision is None else f"{self.precision:.6g}"


def precision_report(records) -> PrecisionSummary:
    """Pair Necessary and Solver records of the same instance and tally the outcomes."""
    by_key = {}
    for rec in records:
        by_key.setdefault((rec.scenario, rec.N, rec.M), {})[rec.method] = rec.verdict
    pairs = [v for v in by_key.values() if "Necessary" in v and "Solver" in v]
    if not pairs:
        raise NoPairs("no instance has both a Necessary and a Solver record")
    infeasible = [v for v in pairs if v["Solver"] == "Infeasible"]
    flagged = sum(1 for v in infeasible if v["Necessary"] == "CertifiedInfeasible")
    counts = {}
    for v in pairs:
        key = (v["Necessary"], v["Solver"])
        counts[key] = counts.get(key, 0) + 1
    suff_bad = sum(1 for v in by_key.values()
                   if v.get("SufficientSingle") == "CertifiedFeasible" and v.get("Solver") == "Infeasible")
    return PrecisionSummary(
        pairs=len(pairs),
        solver_infeasible=len(infeasible),
        flagged=flagged,
        precision=flagged / len(infeasible) if infeasible else None,
        undetermined=sum(1 for v in pairs if v["Necessary"] == "Inconclusive"),
        not_applicable=sum(1 for v in pairs if v["Necessary"] == "NotApplicable"),
        soundness_violations=sum(1 for v in pairs
                                 if v["Necessary"] == "CertifiedInfeasible" and v["Solver"] == "Optimal"),
        sufficient_violations=suff_bad,
        counts=counts,
    )


def median_times(records, method: str, M: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """``(Ns, times)`` of ``method`` at ``M``, sorted by N."""
    pts = sorted((rec.N, rec.time_s) for rec in records if rec.method == method and rec.M == M)
    return np.array([p[0] for p in pts], dtype=float), np.array([p[1] for p in pts], dtype=float)


def loglog_slope(records, method: str, M: int = 1, N_min: int = 0) -> float:
    """Least-squares slope of log(time) against log(N) over ``N >= N_min``."""
    Ns, ts = median_times(records, method, M)
    keep = Ns >= N_min
    if np.count_nonzero(keep) < 2:
        raise ValueError(f"need at least two sample sizes >= {N_min} for {method}")
    return float(np.polyfit(np.log(Ns[keep]), np.log(ts[keep]), 1)[0])


def write_svg(records, path, M: int = 1) -> None:
    """Log-log chart of median time against N, one line per method."""
    series = {}
    for meth in METHODS:
        Ns, ts = median_times(records, meth, M)
        if Ns.size:
            series[meth] = (Ns, ts)
    line_chart(series, path, title=f"median time per call, M={M}", xlabel="N (samples)", ylabel="seconds",
               logx=True, logy=True)
