import numpy as np
import pytest

from drsafe.bench import (
    BENCH_COLUMNS,
    BenchRecord,
    BenchTemplate,
    loglog_slope,
    precision_report,
    read_csv,
    run_random_suite,
    run_sweep,
    time_method,
    write_csv,
    write_svg,
)
from drsafe.exceptions import NoPairs


def rec(scenario, method, verdict, N=5, M=1):
    return BenchRecord(scenario, N, M, 2, 2, method, verdict, 1e-3, 3)


def test_precision_all_feasible_is_na():
    s = precision_report([rec("a", "Necessary", "Inconclusive"), rec("a", "Solver", "Optimal")])
    assert s.precision is None and s.precision_text == "NA"
    assert s.solver_infeasible == 0 and s.undetermined == 1


def test_precision_all_flagged_is_one():
    recs = [rec("a", "Necessary", "CertifiedInfeasible"), rec("a", "Solver", "Infeasible"),
            rec("b", "Necessary", "Inconclusive"), rec("b", "Solver", "Optimal")]
    s = precision_report(recs)
    assert s.precision == 1.0 and s.soundness_violations == 0


def test_precision_counts_violations():
    recs = [rec("a", "Necessary", "CertifiedInfeasible"), rec("a", "Solver", "Optimal"),
            rec("b", "SufficientSingle", "CertifiedFeasible"), rec("b", "Necessary", "Inconclusive"),
            rec("b", "Solver", "Infeasible")]
    s = precision_report(recs)
    assert s.soundness_violations == 1 and s.sufficient_violations == 1 and s.precision == 0.0


def test_no_pairs():
    with pytest.raises(NoPairs):
        precision_report([rec("a", "Necessary", "Inconclusive")])


def test_random_suite_is_sound_and_precision_in_range():
    s = precision_report(run_random_suite(60, seed=3))
    assert s.pairs == 60
    assert s.soundness_violations == 0 and s.sufficient_violations == 0
    assert s.precision is None or 0.0 <= s.precision <= 1.0


@pytest.fixture(scope="module")
def small_sweep():
    base = BenchTemplate.random(m=2, k=3, M=2, seed=1)
    return run_sweep(base, [10, 30], [1, 2], repeats=3, seed=5, min_time=0.0)


def test_sweep_shape(small_sweep):
    keys = {(r.N, r.M, r.method) for r in small_sweep}
    assert (10, 1, "SufficientSingle") in keys
    assert (10, 2, "SufficientSingle") not in keys
    assert all(r.time_s > 0 and r.repeats == 3 for r in small_sweep)
    solver = [r.verdict for r in small_sweep if r.method == "Solver"]
    assert set(solver) <= {"Optimal", "Infeasible"}


def test_sweep_verdicts_deterministic(small_sweep):
    again = run_sweep(BenchTemplate.random(m=2, k=3, M=2, seed=1), [10, 30], [1, 2], repeats=3, seed=5,
                      min_time=0.0, workers=2)
    assert [(r.N, r.M, r.method, r.verdict) for r in again] == \
        [(r.N, r.M, r.method, r.verdict) for r in small_sweep]


def test_sweep_requires_three_repeats():
    with pytest.raises(ValueError):
        run_sweep(BenchTemplate.random(), [10], [1], repeats=2)


def test_csv_roundtrip_and_svg(tmp_path, small_sweep):
    write_csv(small_sweep, tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == ",".join(BENCH_COLUMNS)
    back = read_csv(tmp_path / "b.csv")
    assert [(r.method, r.verdict, r.N) for r in back] == [(r.method, r.verdict, r.N) for r in small_sweep]
    write_svg(small_sweep, tmp_path / "b.svg")
    assert "<svg" in (tmp_path / "b.svg").read_text()


def test_loglog_slope_of_synthetic_power_law():
    recs = [BenchRecord("s", N, 1, 2, 2, "Solver", "Optimal", 1e-6 * N**2.5, 3) for N in (10, 100, 1000)]
    assert loglog_slope(recs, "Solver") == pytest.approx(2.5, abs=1e-9)
    with pytest.raises(ValueError):
        loglog_slope(recs, "Solver", N_min=1000)


def test_time_method_returns_positive_median():
    p = BenchTemplate.random().instance(10, 1, np.random.default_rng(0))
    verdict, secs = time_method("Necessary", p, repeats=3)
    assert verdict in ("Inconclusive", "CertifiedInfeasible") and secs > 0
