import numpy as np
import pytest

from drsafe.dro import AmbiguityConfig, SampleSet, SynthesisProblem
from drsafe.exceptions import InfeasibleProbe
from drsafe.model import ConstraintData
from drsafe.regularity import estimate_point_lipschitz, probe_strict_feasibility, sphere_directions


def box_problem(q0=-10.0, nominal=(1.0, 0.0)):
    con = ConstraintData(q=np.array([q0, 0.0]), R=np.array([[0.0], [1.0]]))
    return SynthesisProblem([con], np.array(nominal), AmbiguityConfig(r=1.0, eps=1.0), SampleSet([[0.0]]))


def test_strict_feasibility_examples():
    assert probe_strict_feasibility(box_problem(), margin=1e-4)
    assert not probe_strict_feasibility(box_problem(q0=10.0), margin=1e-4)
    # q0 = 0: the feasible set is {u : |u| <= 0}, no interior
    assert not probe_strict_feasibility(box_problem(q0=0.0), margin=1e-4)


def test_constant_map_has_zero_ratios():
    rep = estimate_point_lipschitz(box_problem(), np.zeros(2), radii=(1e-2, 1e-3), dirs=4)
    assert rep.strictly_feasible
    np.testing.assert_allclose(rep.max_ratio_per_radius, 0.0, atol=1e-6)


def halfspace_problem():
    # u1 + u2 <= 1 - x1, nominal (x0, x1) + 1: a smooth projection onto a moving half-space
    def constraint(x):
        return ConstraintData(q=np.array([x[0] - 1.0, 1.0, 1.0]), R=np.zeros((3, 1)))

    def nominal(x):
        return np.array([1.0, 1.0 + x[0], 1.0 + x[1]])

    return SynthesisProblem([constraint], nominal, AmbiguityConfig(r=0.0, eps=1.0), SampleSet([[0.0]]))


def test_halfspace_projection_ratios_stabilize():
    rep = estimate_point_lipschitz(halfspace_problem(), np.array([0.1, -0.2]),
                                   radii=(1e-2, 1e-3, 1e-4, 1e-5), dirs=8)
    ratios = rep.max_ratio_per_radius
    assert np.all(np.isfinite(ratios))
    # piecewise-affine map with a Lipschitz constant of about 1.6
    assert np.all(ratios < 3.0)
    assert np.ptp(ratios[1:]) < 1e-2 * ratios.max()
    assert rep.ratio_bounded()


def test_continuity_at_tiny_radius():
    rep = estimate_point_lipschitz(halfspace_problem(), np.array([0.1, -0.2]), radii=(1e-6,), dirs=8)
    assert rep.max_diff_per_radius[0] < 1e-3


def test_infeasible_base_raises():
    with pytest.raises(InfeasibleProbe):
        estimate_point_lipschitz(box_problem(q0=10.0), np.zeros(2))


def test_radii_validation():
    with pytest.raises(ValueError):
        estimate_point_lipschitz(box_problem(), np.zeros(2), radii=(1e-3, 1e-2))


def test_directions_are_deterministic_unit_vectors():
    a = sphere_directions(3, 16, seed=4)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
    assert np.array_equal(a, sphere_directions(3, 16, seed=4))


def test_report_csv(tmp_path):
    rep = estimate_point_lipschitz(halfspace_problem(), np.array([0.1, -0.2]), radii=(1e-2, 1e-3), dirs=4)
    rep.to_csv(tmp_path / "l.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "radius,max_ratio,n_infeasible_probes"
    assert len(lines) == 3


def test_threaded_probes_match_serial():
    p, x0 = halfspace_problem(), np.array([0.1, -0.2])
    a = estimate_point_lipschitz(p, x0, radii=(1e-2, 1e-3), dirs=6)
    b = estimate_point_lipschitz(p, x0, radii=(1e-2, 1e-3), dirs=6, workers=3)
    assert np.array_equal(a.max_ratio_per_radius, b.max_ratio_per_radius)
