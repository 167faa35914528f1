"""Input validation shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array, check_X_y

from .exceptions import DimensionError, SingleClassError


def check_binary_Xy(X, y, require_both=True):
    """Validate a feature matrix and {-1, +1} labels; returns float arrays."""
    X, y = check_X_y(X, y, dtype=float, y_numeric=True)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be -1 or +1; use dataset.select_pair to map class ids")
    if require_both and np.unique(y).size < 2:
        raise SingleClassError("both labels -1 and +1 must be present")
    return X, y.astype(float)


def check_sample_weight(sample_weight, n):
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise DimensionError(f"sample_weight has {w.shape[0]} entries, expected {n}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample_weight must be finite and nonnegative")
    return w


def check_features(X, n_features):
    X = check_array(X, dtype=float)
    if X.shape[1] != n_features:
        raise DimensionError(f"X has {X.shape[1]} features, model expects {n_features}")
    return X
