"""Scaling-law regressor for lifespans, in the scikit-learn estimator style."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.linear_model import LinearRegression
from sklearn.utils.validation import check_is_fitted

from ._validation import check_fit_arrays


class LifespanScalingRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``log T`` against a transform of ``eps``.

    ``form="power"`` regresses on ``log eps`` (slope = power-law exponent);
    ``form="exponential"`` regresses on ``eps^(-exponent)`` (positive slope
    means ``T ~ exp(C eps^(-exponent))``).

    Attributes after ``fit``: ``slope_``, ``intercept_``, ``r2_`` and
    ``residuals_`` (in log T).
    """

    def __init__(self, form: str = "power", exponent: float = 0.5):
        self.form = form
        self.exponent = exponent

    def _design(self, eps):
        if self.form == "power":
            return np.log(eps)[:, None]
        if self.form == "exponential":
            return (eps ** (-float(self.exponent)))[:, None]
        raise ValueError(f"unknown form {self.form!r}")

    def fit(self, X, y):
        eps, T = check_fit_arrays(X, y)
        A = self._design(eps)
        logT = np.log(T)
        lr = LinearRegression().fit(A, logT)
        self.slope_ = float(lr.coef_[0])
        self.intercept_ = float(lr.intercept_)
        self.residuals_ = logT - lr.predict(A)
        ss_tot = float(np.sum((logT - logT.mean()) ** 2))
        self.r2_ = 1.0 - float(np.sum(self.residuals_**2)) / ss_tot if ss_tot > 0 else 1.0
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        eps = np.asarray(X, dtype=np.float64).ravel()
        return np.exp(self.intercept_ + self.slope_ * self._design(eps)[:, 0])

    def score(self, X, y, sample_weight=None):
        """R^2 in log T (the space the fit lives in)."""
        check_is_fitted(self, "slope_")
        logT = np.log(np.asarray(y, dtype=np.float64).ravel())
        pred = np.log(self.predict(X))
        ss_tot = float(np.sum((logT - logT.mean()) ** 2))
        return 1.0 - float(np.sum((logT - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
