"""Small input-validation helpers used across the package."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import ArgumentError, DomainError


def check_theta(theta, name="theta"):
    if not isinstance(theta, numbers.Real) or not np.isfinite(theta) or theta < 1:
        raise DomainError(f"{name} must be a finite real >= 1, got {theta!r}")
    return float(theta)


def check_alpha(alpha, name="alpha"):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha < 0) or np.any(alpha > 1):
        raise DomainError(f"{name} must lie in [0, 1], got {alpha!r}")
    return alpha


def check_rates(rates, name="rates"):
    rates = np.asarray(rates, dtype=float)
    if np.any(~np.isfinite(rates)) or np.any(rates < 0):
        raise DomainError(f"{name} must be finite and non-negative, got {rates!r}")
    return rates


def check_unit_open_closed(u, name="u"):
    """Values must lie in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(u > 1):
        raise DomainError(f"{name} must lie in (0, 1]")
    return u


def check_nonnegative(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError(f"{name} must be non-negative")
    return x


def check_intensity_matrix(X, min_rows=2, min_cols=2):
    """Validate an (m, d) array of strictly positive intensities."""
    X = check_array(X, dtype=float, ensure_min_samples=min_rows, ensure_min_features=min_cols)
    if np.any(X <= 0):
        raise DomainError("intensities must be strictly positive")
    return X


def check_labels(labels, d):
    labels = tuple(str(x) for x in labels)
    if len(labels) != d:
        raise ArgumentError(f"expected {d} labels, got {len(labels)}")
    if len(set(labels)) != d:
        raise ArgumentError("labels must be unique")
    return labels
