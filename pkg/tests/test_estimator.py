import numpy as np
import pytest
from sklearn.base import clone

from drsafe.estimator import DRSafeController
from drsafe.model import ConstraintData


def box_controller(**kw):
    con = ConstraintData(q=np.array([-10.0, 0.0]), R=np.array([[0.0], [1.0]]))
    return DRSafeController(constraints=[con], nominal=lambda x: np.array([1.0, x[0]]), r=1.0, **kw)


def test_get_params_and_clone():
    est = box_controller(eps_bar=0.2)
    params = est.get_params()
    assert params["r"] == 1.0 and params["eps_bar"] == 0.2
    assert clone(est).get_params()["eps_bar"] == 0.2


def test_predict_projects_onto_box():
    est = box_controller().fit(np.zeros((1, 1)))
    assert est.n_features_in_ == 1 and est.eps_ == 1.0
    u = est.predict(np.array([[3.0], [12.0], [-15.0]]))
    np.testing.assert_allclose(u[:, 0], [3.0, 10.0, -10.0], atol=1e-7)


def test_predict_before_fit_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        box_controller().predict(np.zeros((1, 1)))


def test_infeasible_rows_are_nan():
    con = ConstraintData(q=np.array([10.0, 0.0]), R=np.array([[0.0], [1.0]]))
    est = DRSafeController(constraints=[con], nominal=np.array([1.0, 0.0]), r=1.0).fit([[0.0]])
    assert np.isnan(est.predict([[0.0]])).all()
    assert list(est.check_feasibility([[0.0]])) == ["CertifiedInfeasible"]


def test_partial_fit_shrinks_radius_and_eps():
    con = ConstraintData(q=np.array([-10.0, 0.0]), R=np.array([[0.0], [1.0]]))
    est = DRSafeController(constraints=[con], nominal=np.array([1.0, 0.0]), r=None, c2=5.0)
    est.fit(np.zeros((2, 1)))
    r0 = est.radius_
    est.partial_fit(np.ones((8, 1)))
    assert est.n_samples_ == 10 and est.eps_ == pytest.approx(0.1)
    assert est.radius_ < r0
    with pytest.raises(ValueError):
        est.partial_fit(np.ones((1, 2)))


def test_input_validation():
    with pytest.raises(ValueError):
        box_controller().fit(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        DRSafeController().fit(np.zeros((1, 1)))
