import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drsafe.exceptions import DimensionMismatch
from drsafe.model import (
    CertificateFunction,
    CertificateKind,
    ConstraintData,
    UncertainAffineModel,
    assemble_constraint,
    disk_cbf,
    eval_G,
    ext_control,
    linear_class_k,
    quadratic_clf,
    unicycle_model,
)


def linear_model():
    F = lambda x: np.array([[2.0, 0.0], [0.0, 3.0]])
    W1 = lambda x: np.array([[1.0, 0.0], [0.0, 0.0]])
    return UncertainAffineModel(n=2, m=1, F=F, W=(W1,))


def unit_barrier(alpha=0.5):
    return CertificateFunction(CertificateKind.BARRIER, value=lambda x: 1.0,
                               gradient=lambda x: np.array([1.0, 1.0]), class_k=linear_class_k(alpha))


def test_barrier_assembly_hand_example():
    c = assemble_constraint(linear_model(), unit_barrier(), np.zeros(2))
    np.testing.assert_allclose(c.q, [-2.5, -3.0], atol=1e-15)
    np.testing.assert_allclose(c.R, [[-1.0], [0.0]], atol=1e-15)
    assert eval_G(c, [1.0, 1.0], [2.0]) == pytest.approx(-7.5, abs=1e-15)


def test_without_perturbations_R_is_zero():
    model = UncertainAffineModel(n=2, m=1, F=linear_model().F, W=(lambda x: np.zeros((2, 2)),))
    c = assemble_constraint(model, unit_barrier(), np.zeros(2))
    assert not np.any(c.R)


def test_unicycle_at_heading_zero():
    model = unicycle_model(0.05)
    x = np.zeros(3)
    np.testing.assert_allclose(model.nominal(x), [[0, 1, 0], [0, 0, 0.05], [0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(model.perturbations(x)[2], [[0, 0.02, 0], [0, 0, 0.001], [0, 0, 0]], atol=1e-15)


def test_unicycle_nominal_motion():
    model = unicycle_model(0.05)
    np.testing.assert_allclose(model.vector_field(np.zeros(3), [1.0, 0.0], np.zeros(3)), [1.0, 0.0, 0.0])


def test_unicycle_rejects_nonpositive_offset():
    with pytest.raises(ValueError):
        unicycle_model(0.0)


def test_constraint_dimension_check():
    with pytest.raises(DimensionMismatch):
        ConstraintData(q=np.zeros(3), R=np.zeros((2, 1)))
    c = ConstraintData(q=np.zeros(3), R=np.zeros((3, 2)))
    with pytest.raises(DimensionMismatch):
        eval_G(c, np.ones(3), np.ones(3))


def test_wrong_gradient_length_rejected():
    cert = CertificateFunction(CertificateKind.BARRIER, lambda x: 0.0, lambda x: np.ones(3))
    with pytest.raises(DimensionMismatch):
        assemble_constraint(linear_model(), cert, np.zeros(2))


states = st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-np.pi, np.pi)).map(np.array)
vecs2 = st.tuples(st.floats(-5, 5), st.floats(-5, 5)).map(np.array)
vecs3 = st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)).map(np.array)


@settings(max_examples=200, deadline=None)
@given(states, vecs2, vecs3)
def test_barrier_sign_identity(x, u, xi):
    model = unicycle_model(0.05)
    cert = disk_cbf([3.0, 2.0], 1.0, 3, gain=2.0)
    c = assemble_constraint(model, cert, x)
    hdot = cert.gradient(x) @ model.vector_field(x, u, xi)
    expected = -(hdot + 2.0 * cert.value(x))
    assert eval_G(c, ext_control(u), xi) == pytest.approx(expected, abs=1e-12 * (1 + abs(expected)))


@settings(max_examples=200, deadline=None)
@given(states, vecs2, vecs3)
def test_lyapunov_sign_identity(x, u, xi):
    model = unicycle_model(0.05)
    cert = quadratic_clf([7.0, 7.0], 3, gain=0.1)
    c = assemble_constraint(model, cert, x)
    vdot = cert.gradient(x) @ model.vector_field(x, u, xi)
    expected = vdot + 0.1 * cert.value(x)
    assert eval_G(c, ext_control(u), xi) == pytest.approx(expected, abs=1e-12 * (1 + abs(expected)))


@settings(max_examples=100, deadline=None)
@given(states, vecs2, vecs3, vecs3, st.floats(-3, 3))
def test_eval_G_superposition_in_xi(x, u, xi1, xi2, a):
    c = assemble_constraint(unicycle_model(), disk_cbf([3.0, 2.0], 1.0, 3), x)
    ue = ext_control(u)
    g0 = eval_G(c, ue, np.zeros(3))
    lhs = eval_G(c, ue, xi1 + a * xi2) - g0
    rhs = (eval_G(c, ue, xi1) - g0) + a * (eval_G(c, ue, xi2) - g0)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


@settings(max_examples=100, deadline=None)
@given(states, vecs3, vecs3, vecs3, st.floats(-3, 3))
def test_eval_G_linear_in_extended_control(x, xi, v1, v2, a):
    c = assemble_constraint(unicycle_model(), quadratic_clf([7.0, 7.0], 3), x)
    lhs = eval_G(c, v1 + a * v2, xi)
    rhs = eval_G(c, v1, xi) + a * eval_G(c, v2, xi)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))
