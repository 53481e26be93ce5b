"""Estimator-style wrapper around a flow run and the classification of its limit."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import fields as fl
from .flow import FlowConfig, dominant_weight_estimate, lojasiewicz_fit, run_flow
from .exceptions import InsufficientDecay, NotConverged
from .stability import classify_limit

__all__ = ["VortexFlow"]


def _check_pair(X):
    if not (isinstance(X, tuple) and len(X) == 2):
        raise TypeError("expected a (Connection, Section) pair")
    A, u = X
    if not isinstance(A, fl.Connection) or not isinstance(u, fl.Section):
        raise TypeError("expected a (Connection, Section) pair")
    if A.grid != u.grid:
        raise ValueError("connection and section live on different grids")
    return A, u


class VortexFlow(BaseEstimator):
    """Flow a pair to its limit and classify it.

    ``fit`` runs the gradient flow of ``1/2 |Phi|^2``; ``transform`` returns the
    limit pair; ``predict`` returns the stability label of the limit.

    Attributes
    ----------
    report_ : ConvergenceReport
    limit_ : tuple
        The terminal ``(Connection, Section)``.
    gauge_ : ComplexGauge
        ``g`` with ``limit = g^-1 (initial)``.
    verdict_ : StabilityVerdict
    xi_inf_ : ndarray or None
        Dominant direction estimate, when the gauge path settles.
    gamma_ : float or None
    """

    def __init__(self, scheme="semi-implicit", dt0=1e-2, t_max=50.0, tol=1e-8, phi_tol=1e-4,
                 sigma_tol=1e-6, record_every=1):
        self.scheme = scheme
        self.dt0 = dt0
        self.t_max = t_max
        self.tol = tol
        self.phi_tol = phi_tol
        self.sigma_tol = sigma_tol
        self.record_every = record_every

    def _config(self):
        return FlowConfig(scheme=self.scheme, dt0=self.dt0, t_max=self.t_max, tol=self.tol,
                          record_every=self.record_every, keep_gauge=True, raise_on_tmax=False)

    def fit(self, X, y=None):
        A, u = _check_pair(X)
        rep = run_flow(A, u, self._config())
        fin = rep.final
        self.report_ = rep
        self.limit_ = (fin.A, fin.u)
        self.gauge_ = fin.gauge
        try:
            xi = dominant_weight_estimate(rep.gauge_times, -rep.gauge_history)
        except NotConverged:
            xi = None
        self.xi_inf_ = xi
        tol = max(self.tol, rep.grad_norm)
        self.verdict_ = classify_limit(fin.A, fin.u, tol=tol, phi_tol=self.phi_tol,
                                       sigma_tol=self.sigma_tol)
        try:
            phi = rep.column("f_moment")
            self.gamma_, self.gamma_quality_, _ = lojasiewicz_fit(rep.column("t"), phi,
                                                                  f_inf=phi[-1] if phi[-1] > 1e-12 else 0.0)
        except InsufficientDecay:
            self.gamma_, self.gamma_quality_ = None, None
        return self

    def transform(self, X=None):
        check_is_fitted(self, "limit_")
        if X is None:
            return self.limit_
        return VortexFlow(**self.get_params()).fit(X).limit_

    def predict(self, X=None):
        check_is_fitted(self, "verdict_")
        if X is None:
            return self.verdict_.label
        return VortexFlow(**self.get_params()).fit(X).verdict_.label

    def score(self, X=None, y=None):
        """Negative terminal ``|Phi|``; larger is closer to a vortex solution."""
        check_is_fitted(self, "report_")
        return -float(np.asarray(self.report_.series["phi_l2"])[-1])
