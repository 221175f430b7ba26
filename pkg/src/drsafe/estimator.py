"""scikit-learn style wrapper: fit on uncertainty samples, predict controls for states.

``fit(X)`` takes the ``(N, k)`` sample matrix of the uncertainty and
``partial_fit`` appends newly collected samples (shrinking the radius to the
confidence radius of the larger set, as the closed loop does). ``predict``
maps a batch of states to the synthesized controls, with NaN rows where the
program is infeasible.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dro import AmbiguityConfig, SampleSet, SynthesisProblem, radius_schedule
from .exceptions import DrsafeError
from .feasibility import SlackCertificate, check_necessary, check_sufficient_single, check_sufficient_slack
from .numerics import DEFAULT_TOL
from .socp.synthesis import synthesize


class DRSafeController(BaseEstimator):
    """Distributionally robust min-norm safety filter around a nominal controller.

    Parameters
    ----------
    constraints : list of ConstraintData or callables ``x -> ConstraintData``
    nominal : extended nominal control ``[1, u_nom]`` or a callable of the state
    r : Wasserstein radius (``None``: the confidence radius of the fitted samples)
    eps : risk level (``None``: ``1/N``); always capped at ``1/N``
    shrink_radius : on ``partial_fit``, lower the radius to the confidence radius of the new sample count
    """

    def __init__(self, constraints=None, nominal=None, r=None, eps=None, eps_bar=0.1, c1=2.0, c2=1.0, a=2.0,
                 control_bound=None, form="reduced", require_invertible=False, tol=DEFAULT_TOL,
                 shrink_radius=True):
        self.constraints = constraints
        self.nominal = nominal
        self.r = r
        self.eps = eps
        self.eps_bar = eps_bar
        self.c1 = c1
        self.c2 = c2
        self.a = a
        self.control_bound = control_bound
        self.form = form
        self.require_invertible = require_invertible
        self.tol = tol
        self.shrink_radius = shrink_radius

    @classmethod
    def from_problem(cls, p: SynthesisProblem, **params) -> "DRSafeController":
        """An unfitted controller with the constraints, nominal and ambiguity settings of ``p``."""
        amb = p.ambiguity
        base = dict(constraints=list(p.constraints), nominal=p.nominal, r=amb.r, eps=amb.eps, eps_bar=amb.eps_bar,
                    c1=amb.c1, c2=amb.c2, a=amb.a, control_bound=p.control_bound)
        base.update(params)
        return cls(**base)

    def _ambiguity(self, N: int, k: int, r_prev=None) -> AmbiguityConfig:
        probe = AmbiguityConfig(r=0.0, eps=1.0 / N, eps_bar=self.eps_bar, c1=self.c1, c2=self.c2, a=self.a, k=k)
        r_N = radius_schedule(N, probe)
        if r_prev is None:
            r = r_N if self.r is None else float(self.r)
        else:
            r = min(r_prev, r_N) if self.shrink_radius else r_prev
        eps = 1.0 / N if self.eps is None else min(float(self.eps), 1.0 / N)
        return AmbiguityConfig(r=r, eps=eps, eps_bar=self.eps_bar, c1=self.c1, c2=self.c2, a=self.a, k=k)

    def _set_samples(self, xs: np.ndarray, r_prev=None):
        if not self.constraints or self.nominal is None:
            raise ValueError("constraints and nominal must be set before fitting")
        samples = SampleSet(xs)
        amb = self._ambiguity(samples.N, samples.k, r_prev)
        self.problem_ = SynthesisProblem(self.constraints, self.nominal, amb, samples,
                                         control_bound=self.control_bound)
        self.n_features_in_ = samples.k
        self.n_samples_ = samples.N
        self.radius_ = amb.r
        self.eps_ = amb.eps
        return self

    def fit(self, X, y=None):
        """Store the ``(N, k)`` uncertainty samples ``X``; ``y`` is ignored."""
        xs = check_array(X, dtype=float, ensure_min_samples=1)
        return self._set_samples(xs)

    def partial_fit(self, X, y=None):
        """Append samples; the radius can only shrink."""
        xs = check_array(X, dtype=float, ensure_min_samples=1)
        if not hasattr(self, "problem_"):
            return self._set_samples(xs)
        if xs.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {xs.shape[1]} features, the controller was fitted with {self.n_features_in_}")
        return self._set_samples(np.vstack([self.problem_.samples.samples, xs]), r_prev=self.radius_)

    def _states(self, X):
        return check_array(X, dtype=float, ensure_min_samples=1)

    def predict(self, X) -> np.ndarray:
        """Controls for the states in the rows of ``X``; NaN rows where the program is infeasible."""
        check_is_fitted(self, "problem_")
        states = self._states(X)
        out = []
        for x in states:
            res = synthesize(self.problem_, x, form=self.form)
            out.append(res.u if res.feasible else None)
        m = next((len(u) for u in out if u is not None), None)
        if m is None:
            m = self.problem_.constraints_at(states[0])[0].m
        return np.array([u if u is not None else np.full(m, np.nan) for u in out])

    def check_feasibility(self, X, which: str = "necessary", slack=None, slack_bound: float = 1.0) -> np.ndarray:
        """Certificate verdicts (strings) for the states in the rows of ``X``.

        ``which`` is ``"necessary"``, ``"sufficient1"`` or ``"sufficient3"``;
        the last needs the per-constraint ``slack`` values. Errors of a check
        are reported as ``"Error:<name>"``.
        """
        check_is_fitted(self, "problem_")
        states = self._states(X)
        out = []
        for x in states:
            try:
                if which == "necessary":
                    v = check_necessary(self.problem_, x, self.tol, require_invertible=self.require_invertible)
                elif which == "sufficient1":
                    v = check_sufficient_single(self.problem_, x, self.tol,
                                                require_invertible=self.require_invertible)
                elif which == "sufficient3":
                    if slack is None:
                        raise ValueError("the slack check needs `slack` values")
                    v = check_sufficient_slack(self.problem_, x, SlackCertificate(tuple(slack), slack_bound))
                else:
                    raise ValueError(f"unknown check {which!r}")
                out.append(v.kind.value)
            except DrsafeError as exc:
                out.append(f"Error:{type(exc).__name__}")
        return np.array(out, dtype=object)
