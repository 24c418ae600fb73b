"""Scikit-learn style front end for the sparse envelope solver.

The regressor treats the design matrix as the measurement operator and fits
coefficients by forward-backward splitting, so it drops into pipelines and
model-selection tooling via ``get_params`` / ``set_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .base import Regularizer
from .penalty import PenaltySequence, QuadraticEnvelope, penalty_from_spec
from .solver import SolverConfig, VectorProblem, fbs_solve

__all__ = ["EnvelopeRegressor"]


class EnvelopeRegressor(RegressorMixin, BaseEstimator):
    """Sparse linear regression with a quadratic-envelope cardinality penalty.

    Parameters
    ----------
    penalty : str, PenaltySequence or Regularizer, default="capped:2.0:20"
        Inline penalty spec (``"const:MU"``, ``"capped:MU:KMAX"``,
        ``"fixedcard:KMAX"`` or ``"@file.json"``), an explicit sequence, or
        any regularizer with ``value`` / ``prox``.
    step : float or None
        Forward step size; ``None`` picks a descent-safe default from the
        estimated operator norm.
    max_iter, x_tol, prox_tol : solver controls, see
        :class:`~qenvelope.solver.SolverConfig`.
    record_trace : bool
        Keep per-iteration objective values in ``objective_trace_``.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
    converged_ : bool
    objective_ : float
    stationarity_residual_ : float
    """

    def __init__(
        self,
        penalty="capped:2.0:20",
        step=None,
        max_iter=2000,
        x_tol=1e-10,
        prox_tol=1e-10,
        record_trace=False,
    ):
        self.penalty = penalty
        self.step = step
        self.max_iter = max_iter
        self.x_tol = x_tol
        self.prox_tol = prox_tol
        self.record_trace = record_trace

    def _resolve_penalty(self, n_features: int) -> Regularizer:
        if isinstance(self.penalty, Regularizer):
            return self.penalty
        if isinstance(self.penalty, PenaltySequence):
            return QuadraticEnvelope(self.penalty)
        return QuadraticEnvelope(penalty_from_spec(str(self.penalty), n_features))

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        reg = self._resolve_penalty(X.shape[1])
        problem = VectorProblem(A=np.asarray(X, dtype=float), b=np.asarray(y, dtype=float))
        config = SolverConfig(
            max_iter=self.max_iter,
            step=self.step,
            x_tol=self.x_tol,
            prox_tol=self.prox_tol,
            record_trace=self.record_trace,
        )
        result = fbs_solve(problem, reg, config)
        self.coef_ = result.x
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.objective_ = result.final_objective
        self.stationarity_residual_ = result.stationarity_residual
        if self.record_trace:
            self.objective_trace_ = result.objective_trace
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_
