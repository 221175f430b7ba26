import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drsafe.dro import (
    AmbiguityConfig,
    SampleSet,
    SynthesisProblem,
    assemble_epigraph_socp,
    assemble_reduced_socp,
    cvar_empirical,
    radius_schedule,
    reduce_to_soc,
)
from drsafe.exceptions import EmptyInput, EpsTooLarge, InvalidConfig
from drsafe.model import ConstraintData
from drsafe.socp.program import ConeKind


def brute_cvar(values, eps):
    v = np.asarray(values, dtype=float)
    ts = np.linspace(-v.max() - 1, -v.min() + 1, 20001)
    obj = np.maximum(v[None, :] + ts[:, None], 0).mean(axis=1) / eps - ts
    return obj.min()


def test_cvar_examples():
    assert cvar_empirical([1, 2, 3], 1 / 3) == pytest.approx(3.0, abs=1e-12)
    assert cvar_empirical([0, 10], 1.0) == pytest.approx(5.0, abs=1e-12)
    assert cvar_empirical([4.2] * 7, 0.5) == pytest.approx(4.2, abs=1e-12)


def test_cvar_errors():
    with pytest.raises(EmptyInput):
        cvar_empirical([], 0.5)
    with pytest.raises(ValueError):
        cvar_empirical([1.0], 0.0)


def test_cvar_matches_grid_search(rng):
    for _ in range(20):
        v = rng.normal(size=rng.integers(1, 9))
        eps = rng.uniform(0.05, 1.0)
        # grid spacing bounds the error of the brute force from above
        assert cvar_empirical(v, eps) <= brute_cvar(v, eps) + 1e-12
        assert cvar_empirical(v, eps) >= brute_cvar(v, eps) - 1e-3 / eps


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(0.0, 1.0))
def test_cvar_is_max_for_small_eps(values, frac):
    eps = max(frac, 1e-3) / len(values)
    assert cvar_empirical(values, eps) == pytest.approx(max(values), abs=1e-10 * (1 + max(map(abs, values))))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_cvar_nonincreasing_in_eps(values, e1, e2):
    lo, hi = sorted((e1, e2))
    assert cvar_empirical(values, hi) <= cvar_empirical(values, lo) + 1e-9


def test_radius_schedule_examples():
    cfg = AmbiguityConfig(r=0.0, eps=1.0, eps_bar=0.5, c1=math.e / 2, c2=1.0, k=2)
    assert radius_schedule(4, cfg) == pytest.approx(0.5, abs=1e-12)
    assert radius_schedule(10, cfg) == pytest.approx(0.1**0.5, abs=1e-12)
    assert radius_schedule(1000, cfg) / radius_schedule(100, cfg) == pytest.approx(10**-0.5, rel=1e-12)


def test_radius_schedule_second_branch():
    cfg = AmbiguityConfig(r=0.0, eps=1.0, eps_bar=0.1, c1=2.0, c2=0.01, a=3.0, k=2)
    L = math.log(20.0)
    assert radius_schedule(5, cfg) == pytest.approx((L / 0.05) ** (1 / 3), rel=1e-12)


def test_radius_schedule_rejects_nonpositive_log():
    with pytest.raises(InvalidConfig):
        radius_schedule(5, AmbiguityConfig(r=0.0, eps=1.0, eps_bar=0.5, c1=0.4, k=2))
    with pytest.raises(EmptyInput):
        radius_schedule(0, AmbiguityConfig(r=0.0, eps=1.0, k=2))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10_000), st.integers(1, 5), st.floats(0.01, 0.9))
def test_radius_schedule_decreasing(N, k, eps_bar):
    cfg = AmbiguityConfig(r=0.0, eps=1.0, eps_bar=eps_bar, c1=2.0, k=k)
    assert radius_schedule(N + 1, cfg) < radius_schedule(N, cfg)
    smaller = AmbiguityConfig(r=0.0, eps=1.0, eps_bar=eps_bar / 2, c1=2.0, k=k)
    assert radius_schedule(N, smaller) > radius_schedule(N, cfg)


def test_ambiguity_validation():
    with pytest.raises(InvalidConfig):
        AmbiguityConfig(r=-1.0, eps=0.5)
    with pytest.raises(InvalidConfig):
        AmbiguityConfig(r=0.0, eps=1.5)
    with pytest.raises(InvalidConfig):
        AmbiguityConfig(r=0.0, eps=0.5, eps_bar=1.0)


def toy_problem(q=(-10.0, 0.0), r=1.0, eps=1.0, xi=((0.0,),)):
    con = ConstraintData(q=np.array(q), R=np.array([[0.0], [1.0]]))
    return SynthesisProblem([con], np.array([1.0, 0.0]), AmbiguityConfig(r=r, eps=eps), SampleSet(np.array(xi)))


def test_reduce_hand_example_is_box():
    (soc,) = reduce_to_soc(toy_problem(), 0)
    for u, ok in [(9.99, True), (-9.99, True), (10.01, False), (-10.01, False)]:
        assert (soc.value([1.0, u]) <= 0) == ok
    assert soc.value([1.0, 10.0]) == pytest.approx(0.0, abs=1e-12)


def test_reduce_zero_radius_is_linear(rng):
    p = toy_problem(r=0.0, eps=0.5, xi=((0.3,), (-1.2,)))
    socs = reduce_to_soc(p, 0)
    assert len(socs) == 2
    for s in socs:
        assert not np.any(s.A)


def test_eps_too_large():
    p = toy_problem(eps=1.0, xi=((0.0,), (1.0,)))
    with pytest.raises(EpsTooLarge):
        reduce_to_soc(p, 0)
    with pytest.raises(EpsTooLarge):
        assemble_epigraph_socp(p)


def test_epigraph_block_counts():
    prog = assemble_epigraph_socp(toy_problem())
    socs = [c for c in prog.cones if c.kind is ConeKind.SOC]
    # one DRO cone of dim 1 + k and the epigraph cone of dim m + 2
    assert sorted(c.dim for c in socs) == [2, 3]
    assert sum(c.dim for c in prog.cones if c.kind is not ConeKind.SOC) == 2
    assert prog.A.shape[0] == sum(c.dim for c in prog.cones)


def test_degenerate_cone_still_valid():
    con = ConstraintData(q=np.array([-1.0, 1.0]), R=np.zeros((2, 1)))
    p = SynthesisProblem([con], np.array([1.0, 0.0]), AmbiguityConfig(r=0.0, eps=1.0), SampleSet([[0.0]]))
    for prog in (assemble_epigraph_socp(p), assemble_reduced_socp(p)):
        assert prog.A.shape[0] == sum(c.dim for c in prog.cones)
        assert np.all(np.isfinite(prog.A))


def test_sample_set_csv_roundtrip(tmp_path, rng):
    s = SampleSet(rng.normal(size=(5, 3)))
    s.to_csv(tmp_path / "s.csv")
    back = SampleSet.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.samples, s.samples)
    assert s.append(np.ones(3)).N == 6
    with pytest.raises(EmptyInput):
        SampleSet(np.zeros((0, 2)))
