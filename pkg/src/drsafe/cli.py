"""Command-line interface: ``drsafe {solve,check,simulate,bench,lipschitz}``.

Exit codes
    solve      0 optimal, 2 infeasible, 1 error (including other solver outcomes)
    check      0 CertifiedFeasible, 2 CertifiedInfeasible, 3 Inconclusive, 4 NotApplicable, 1 error
    simulate   0 done, 1 error
    bench      0 done, 1 error
    lipschitz  0 done, 2 base state infeasible, 1 error

CSV files land in ``--out`` (default ``output.dir`` of the config, else
``drsafe_out``). Wall-clock columns are left blank in trajectory logs unless
``--timings`` is given, so reruns are byte-identical; bench output is a timing
table by nature and only its non-time columns repeat exactly.
``DRSAFE_THREADS`` caps the worker threads of ``bench`` and ``lipschitz``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .config import RunConfig, load_config
from .exceptions import DrsafeError, InfeasibleProbe, WrongM
from .feasibility import VerdictKind, check_necessary, check_sufficient_single, check_sufficient_slack
from .regularity import estimate_point_lipschitz
from .sim import run_closed_loop
from .socp.solver import Status
from .socp.synthesis import synthesize

CHECK_EXIT = {
    VerdictKind.CERTIFIED_FEASIBLE: 0,
    VerdictKind.CERTIFIED_INFEASIBLE: 2,
    VerdictKind.INCONCLUSIVE: 3,
    VerdictKind.NOT_APPLICABLE: 4,
}


def _threads() -> int:
    raw = os.environ.get("DRSAFE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DrsafeError(f"DRSAFE_THREADS must be an integer, got {raw!r}") from None


def _parse_x(text: str | None, default):
    if text is None:
        return default
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise DrsafeError(f"--x must be comma-separated numbers, got {text!r}") from None


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output.get("dir", "drsafe_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v) -> str:
    return ",".join(f"{float(e):.9g}" for e in np.atleast_1d(v))


def _seed(args, cfg: RunConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    p, x0 = cfg.problem(_seed(args, cfg))
    x = _parse_x(args.x, x0)
    res = synthesize(p, x)
    if res.status is Status.OPTIMAL:
        print(_fmt(res.u))
        return 0
    if res.status is Status.INFEASIBLE:
        print("INFEASIBLE")
        return 2
    print(f"solver failed: {res.status.value}", file=sys.stderr)
    return 1


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    p, x0 = cfg.problem(_seed(args, cfg))
    x = _parse_x(args.x, x0)
    if args.which == "necessary":
        v = check_necessary(p, x, cfg.tol, require_invertible=cfg.require_invertible)
    elif args.which == "sufficient1":
        v = check_sufficient_single(p, x, cfg.tol, require_invertible=cfg.require_invertible)
    else:
        v = check_sufficient_slack(p, x, cfg.slack_certificate(p, x))
    line = v.kind.value
    if v.reason:
        line += f" {v.reason}"
    if np.isfinite(v.threshold):
        line += f" threshold={v.threshold:.9g} radius={v.radius:.9g}"
    print(line)
    return CHECK_EXIT[v.kind]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scen = cfg.scenario_config(args.seed)
    log = run_closed_loop(scen)
    out = _out_dir(args, cfg)
    log.to_csv(out / "trajectory.csv", timings=args.timings)
    if args.svg or cfg.output.get("svg", False):
        log.to_svg(out / "trajectory.svg")
    statuses = [rec.status for rec in log.records[:-1]]
    print(f"steps={len(statuses)} optimal={statuses.count(Status.OPTIMAL.value)} "
          f"infeasible={statuses.count(Status.INFEASIBLE.value)} final_distance={log.final_distance():.6g}"
          + (f" min_h={log.min_barrier():.6g}" if scen.M == 2 else "")
          + f" mirror_violations={log.mirror_violations()}")
    print(out / "trajectory.csv")
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    b = cfg.bench
    seed = _seed(args, cfg)
    if b.get("template", "random") == "random":
        base = bench_mod.BenchTemplate.random(m=b.get("m", 2), k=b.get("k", 3), M=max(b.get("Ms", [1])), seed=seed,
                                              noise=b.get("noise", 1e-3))
    else:
        p, x0 = cfg.problem(seed)
        base = bench_mod.BenchTemplate.from_problem(p, _parse_x(args.x, x0),
                                                    require_invertible=cfg.require_invertible, name="model")
    records = bench_mod.run_sweep(base, b.get("Ns", [10, 100, 1000]), b.get("Ms", [1]), b.get("repeats", 5), seed,
                                  methods=tuple(b.get("methods", bench_mod.METHODS)), workers=_threads(),
                                  min_time=b.get("min_time", 2e-3))
    out = _out_dir(args, cfg)
    bench_mod.write_csv(records, out / "bench.csv")
    if args.svg or cfg.output.get("svg", False):
        for M in sorted({rec.M for rec in records}):
            bench_mod.write_svg(records, out / f"bench_M{M}.svg", M)
    for rec in records:
        print(f"N={rec.N} M={rec.M} {rec.method:<16} {rec.verdict:<20} {rec.time_s:.3e} s")
    print(out / "bench.csv")
    return 0


def cmd_lipschitz(args) -> int:
    cfg = load_config(args.config)
    p, x0 = cfg.problem(_seed(args, cfg))
    x = _parse_x(args.x, x0)
    if x is None:
        raise DrsafeError("lipschitz needs a state: pass --x or use a state-dependent model")
    opts = cfg.lipschitz
    try:
        rep = estimate_point_lipschitz(p, x, radii=tuple(opts.get("radii", (1e-2, 1e-3, 1e-4, 1e-5))),
                                       dirs=opts.get("dirs", 16), seed=_seed(args, cfg),
                                       margin=opts.get("margin", 1e-4), workers=_threads())
    except InfeasibleProbe as exc:
        print(f"INFEASIBLE: {exc}")
        return 2
    out = _out_dir(args, cfg)
    rep.to_csv(out / "lipschitz.csv")
    for row in rep.rows():
        print(f"radius={row['radius']} max_ratio={row['max_ratio']} infeasible_probes={row['n_infeasible_probes']}")
    print(f"strictly_feasible={rep.strictly_feasible} bounded={rep.ratio_bounded()}")
    print(out / "lipschitz.csv")
    return 0


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1: exit code 2 means "infeasible" in this interface."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drsafe", description="Distributionally robust safe control synthesis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, x=True):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        if x:
            sp.add_argument("--x", help='state as "v1,v2,..." (default: the scenario start state)')
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--svg", action="store_true", help="also write SVG charts")

    common(sub.add_parser("solve", help="synthesize the control at a state"))
    sp = sub.add_parser("check", help="run a feasibility certificate")
    common(sp)
    sp.add_argument("--which", choices=("necessary", "sufficient1", "sufficient3"), default="necessary")
    sp = sub.add_parser("simulate", help="closed-loop simulation")
    common(sp, x=False)
    sp.add_argument("--timings", action="store_true", help="fill the wall-clock columns of the log")
    common(sub.add_parser("bench", help="timing sweep of certificates versus the solver"))
    common(sub.add_parser("lipschitz", help="point-Lipschitz ratio ladder at a state"))
    return parser


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "simulate": cmd_simulate, "bench": cmd_bench,
            "lipschitz": cmd_lipschitz}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except WrongM as exc:
        print(f"error: WrongM: {exc}", file=sys.stderr)
        return 1
    except DrsafeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
