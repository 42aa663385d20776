"""scikit-learn style wrappers around the calibration pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_intensity_matrix
from .diagnostics import ALPHA_FLOOR, extract_systemic_intensity
from .estimation import FitConfig, fit, objective, pairwise_tau_matrix
from .exceptions import ArgumentError, DomainError
from .panel import IntensityPanel

__all__ = ["ContagionEstimator", "CreditTriangleTransformer"]


def _panel_from(X, labels=None) -> IntensityPanel:
    if isinstance(X, IntensityPanel):
        return X
    cols = getattr(X, "columns", None)
    values = check_intensity_matrix(X)
    if labels is None and cols is not None:
        labels = tuple(str(c) for c in cols)
    return IntensityPanel.from_array(values, labels)


class ContagionEstimator(TransformerMixin, BaseEstimator):
    """Fit ``(alpha_1, ..., alpha_d, theta)`` to a panel of intensities.

    ``X`` is an ``(m, d)`` array of positive intensities (rows are dates) or
    an :class:`IntensityPanel`. After fitting, :meth:`transform` maps a panel
    onto the implied systemic intensity, one column.

    Attributes
    ----------
    alphas_ : ndarray of shape (d,)
    theta_ : float
    objective_ : float
    tau_matrix_ : TauMatrix
    result_ : FitResult
    """

    def __init__(self, restarts=50, initial_temperature=0.05, final_temperature=1e-6,
                 cooling=0.95, steps_per_temperature=200, alpha_scale=0.1, theta_scale=0.5,
                 theta_max=50.0, distance="quadratic", seed=0, differences=False, labels=None):
        self.restarts = restarts
        self.initial_temperature = initial_temperature
        self.final_temperature = final_temperature
        self.cooling = cooling
        self.steps_per_temperature = steps_per_temperature
        self.alpha_scale = alpha_scale
        self.theta_scale = theta_scale
        self.theta_max = theta_max
        self.distance = distance
        self.seed = seed
        self.differences = differences
        self.labels = labels

    def _config(self) -> FitConfig:
        return FitConfig(
            restarts=self.restarts,
            initial_temperature=self.initial_temperature,
            final_temperature=self.final_temperature,
            cooling=self.cooling,
            steps_per_temperature=self.steps_per_temperature,
            alpha_scale=self.alpha_scale,
            theta_scale=self.theta_scale,
            theta_max=self.theta_max,
            seed=self.seed,
            distance=self.distance,
        )

    def fit(self, X, y=None):
        panel = _panel_from(X, self.labels)
        self.tau_matrix_ = pairwise_tau_matrix(panel, self.differences, on_undefined="nan")
        self.result_ = fit(self.tau_matrix_, self._config())
        self.alphas_ = np.array(self.result_.alphas)
        self.theta_ = self.result_.theta
        self.objective_ = self.result_.objective
        self.labels_ = panel.entities
        self.n_features_in_ = panel.d
        return self

    def _check_panel(self, X):
        check_is_fitted(self, "result_")
        panel = _panel_from(X, self.labels_ if not isinstance(X, IntensityPanel) else None)
        if panel.d != self.n_features_in_:
            raise ArgumentError(f"expected {self.n_features_in_} columns, got {panel.d}")
        return panel

    def transform(self, X):
        """Implied systemic intensity, shape ``(m, 1)``."""
        panel = self._check_panel(X)
        series = extract_systemic_intensity(panel, self.result_.params, ALPHA_FLOOR)
        return series.lambda0_hat[:, None]

    def score(self, X, y=None):
        """Negative tau distance of the fitted parameters on ``X``."""
        panel = self._check_panel(X)
        target = pairwise_tau_matrix(panel, self.differences, on_undefined="nan")
        return -objective(self.result_.params, target, self.distance)


class CreditTriangleTransformer(TransformerMixin, BaseEstimator):
    """Spreads in basis points to flat intensities ``a * s / (1 - R) + b``.

    ``scale`` and ``shift`` are the optional affine adjustment (identity by
    default) standing in for a risk-premium correction.
    """

    def __init__(self, recovery=0.4, scale=1.0, shift=0.0):
        self.recovery = recovery
        self.scale = scale
        self.shift = shift

    def _check_params(self):
        if not 0.0 <= self.recovery < 1.0:
            raise DomainError(f"recovery must lie in [0, 1), got {self.recovery!r}")

    def fit(self, X, y=None):
        self._check_params()
        X = check_array(X, dtype=float)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        self._check_params()
        X = check_array(X, dtype=float)
        if np.any(X <= 0):
            raise DomainError("spreads must be strictly positive")
        out = self.scale * (X / 1e4) / (1.0 - self.recovery) + self.shift
        if np.any(out <= 0):
            raise DomainError("adjusted intensities must stay positive")
        return out

    def inverse_transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        return (X - self.shift) / self.scale * (1.0 - self.recovery) * 1e4
