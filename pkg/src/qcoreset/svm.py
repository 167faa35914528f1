"""Weighted kernel SVM: dual problem with per-point boxes ``0 <= alpha_i <= w_i * C``.

The dual (min form) is

    H(alpha) = 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j) - sum_i alpha_i
    s.t. 0 <= alpha_i <= w_i * C,  sum_i alpha_i y_i = 0

and is solved by SMO with maximal-violating-pair selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._io import clean_zeros
from .exceptions import ConvergenceError, DimensionError, SingleClassError
from .validation import check_binary_Xy, check_features, check_sample_weight

__all__ = [
    "KernelSpec",
    "SvmModel",
    "kernel_eval",
    "gram_matrix",
    "median_heuristic_gamma",
    "smo_solve",
    "train_weighted_svm",
    "compute_bias",
    "decide",
    "dual_objective",
    "WeightedKernelSVC",
]

BOUND_EPS = 1e-8
TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError(f"rbf kernel needs gamma > 0, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))

    def to_json(self):
        return {"kind": self.kind, "gamma": self.gamma}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["kind"], float(doc.get("gamma", 1.0)))


def kernel_eval(spec, x, x2):
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.shape != x2.shape:
        raise DimensionError(f"kernel arguments differ in length: {x.shape[0]} vs {x2.shape[0]}")
    if spec.kind == "linear":
        return float(x @ x2)
    diff = x - x2
    return float(np.exp(-spec.gamma * (diff @ diff)))


def gram_matrix(spec, A, B=None):
    """Kernel matrix ``k(A_i, B_j)``; ``B`` defaults to ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"feature dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-spec.gamma * np.einsum("ijk,ijk->ij", diff, diff))


def median_heuristic_gamma(X):
    """``1 / median`` of the pairwise squared distances (i < j)."""
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)[np.triu_indices(X.shape[0], 1)]
    med = float(np.median(d2)) if d2.size else 0.0
    return 1.0 / med if med > 0 else 1.0


@dataclass(frozen=True, eq=False)
class SvmModel:
    """Trained dual SVM.  Per-point boxes are ``weights * C``.

    The equality constraint is not enforced here because models decoded
    from a QUBO only satisfy it approximately; see :attr:`equality_residual`.
    """

    points: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    alphas: np.ndarray
    bias: float
    C: float
    kernel: KernelSpec

    def __post_init__(self):
        X = np.array(self.points, dtype=float)
        if X.ndim != 2:
            raise DimensionError("points must be a 2-D matrix")
        n = X.shape[0]
        arrays = {}
        for name in ("labels", "weights", "alphas"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            if a.shape[0] != n:
                raise DimensionError(f"{name} has length {a.shape[0]}, expected {n}")
            arrays[name] = a
        if not self.C > 0:
            raise ValueError("C must be positive")
        upper = arrays["weights"] * self.C
        if np.any(arrays["alphas"] < -BOUND_EPS) or np.any(arrays["alphas"] > upper + BOUND_EPS):
            raise ValueError("alphas violate the box 0 <= alpha_i <= w_i * C")
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")
        for name, a in [("points", X)] + list(arrays.items()):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "C", float(self.C))

    @property
    def upper(self):
        return self.weights * self.C

    @property
    def equality_residual(self):
        return abs(float(self.alphas @ self.labels))

    @property
    def support(self):
        return np.flatnonzero(self.alphas > BOUND_EPS)

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.points.shape[1]:
            raise DimensionError(
                f"input has {X.shape[1]} features, model expects {self.points.shape[1]}"
            )
        return gram_matrix(self.kernel, X, self.points) @ (self.alphas * self.labels) + self.bias

    def predict(self, X):
        return np.sign(self.decision_function(X))

    def to_json(self):
        return {
            "points": [clean_zeros(r) for r in self.points],
            "labels": [int(v) for v in self.labels],
            "weights": clean_zeros(self.weights),
            "alphas": clean_zeros(self.alphas),
            "bias": float(self.bias) + 0.0,
            "C": self.C,
            "kernel": self.kernel.to_json(),
        }

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["points"], dtype=float), doc["labels"], doc["weights"],
                   doc["alphas"], float(doc["bias"]), float(doc["C"]),
                   KernelSpec.from_json(doc["kernel"]))


def dual_objective(alphas, labels, weights, points, spec):
    """Min-form dual objective ``1/2 a'Qa - sum(a)``; ``weights`` only shape the box."""
    a = np.asarray(alphas, dtype=float)
    y = np.asarray(labels, dtype=float)
    ay = a * y
    return float(0.5 * ay @ gram_matrix(spec, points) @ ay - a.sum())


def smo_solve(K, labels, upper, tol=1e-6, max_iter=10_000, trace=None):
    """SMO on a precomputed kernel matrix.

    Each iteration moves the maximal KKT-violating pair along the
    equality-preserving direction, with the step clipped to both boxes.
    Appends the objective after every step to ``trace`` when given.

    Returns
    -------
    alpha : ndarray
    n_iter : int
    violation : float
    """
    y = np.asarray(labels, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = y.shape[0]
    Q = np.outer(y, y) * K
    alpha = np.zeros(n)
    G = -np.ones(n)
    violation = 0.0
    for it in range(max_iter + 1):
        v = -y * G
        up = ((y > 0) & (alpha < upper)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < upper))
        if not up.any() or not low.any():
            violation = 0.0
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        violation = float(v[i] - v[j])
        if violation <= tol:
            break
        if it == max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", violation)
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        lim_i = upper[i] - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else upper[j] - alpha[j]
        t = min(violation / quad, lim_i, lim_j)
        di, dj = y[i] * t, -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        if t == lim_i:
            alpha[i] = upper[i] if y[i] > 0 else 0.0
        if t == lim_j:
            alpha[j] = 0.0 if y[j] > 0 else upper[j]
        G += Q[:, i] * di + Q[:, j] * dj
        if trace is not None:
            ay = alpha * y
            trace.append(float(0.5 * ay @ K @ ay - alpha.sum()))
    return alpha, it, violation


def _bias(K, y, alpha, upper):
    residual = y - K @ (alpha * y)
    spread = np.clip(alpha * (upper - alpha), 0.0, None)
    denom = float(spread.sum())
    if denom >= 1e-12:
        return float(spread @ residual) / denom
    sv = alpha > BOUND_EPS
    if sv.any():
        return float(residual[sv].mean())
    return 0.0


def compute_bias(model):
    """Bias weighted by ``alpha_i (C_i - alpha_i)`` over the model's points.

    Falls back to the mean residual over support vectors when every alpha
    sits on a bound, and to 0 when there are no support vectors.  Any bias
    already stored in ``model`` is ignored.
    """
    K = gram_matrix(model.kernel, model.points)
    return _bias(K, model.labels, model.alphas, model.upper)


def train_weighted_svm(points, labels, weights, C, spec, tol=1e-6, max_iter=10_000):
    """Solve the weighted dual and attach the bias.

    Points with zero weight get a zero-width box and stay inert.
    """
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    w = check_sample_weight(weights, X.shape[0])
    if X.ndim != 2 or y.shape[0] != X.shape[0]:
        raise DimensionError("points and labels disagree in length")
    if X.shape[0] < 2:
        raise SingleClassError("need at least two training points")
    if not ((y == 1).any() and (y == -1).any()):
        raise SingleClassError("both labels -1 and +1 must be present")
    if not C > 0:
        raise ValueError("C must be positive")
    K = gram_matrix(spec, X)
    upper = w * C
    alpha, _, _ = smo_solve(K, y, upper, tol, max_iter)
    b = _bias(K, y, alpha, upper)
    return SvmModel(X, y, w, alpha, b, C, spec)


def decide(model, x):
    """Decision value and three-way sign (0 exactly on the boundary)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    value = float(model.decision_function(x)[0])
    label = 1 if value > 0 else (-1 if value < 0 else 0)
    return value, label


class _KernelClassifierBase(ClassifierMixin, BaseEstimator):
    """Prediction side shared by the classical and QUBO-trained classifiers."""

    def _kernel_spec(self, X):
        if self.kernel == "linear":
            return KernelSpec("linear")
        gamma = median_heuristic_gamma(X) if self.gamma == "median" else float(self.gamma)
        return KernelSpec("rbf", gamma)

    def _set_fitted(self, model, n_features):
        self.model_ = model
        self.kernel_spec_ = model.kernel
        self.gamma_ = model.kernel.gamma
        self.dual_coef_ = model.alphas * model.labels
        self.intercept_ = model.bias
        self.support_ = model.support
        self.classes_ = np.array([-1.0, 1.0])
        self.n_features_in_ = n_features

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_features(X, self.n_features_in_)
        return self.model_.decision_function(X)

    def predict(self, X):
        return np.sign(self.decision_function(X))


class WeightedKernelSVC(_KernelClassifierBase):
    """Kernel SVM with per-sample box constraints ``sample_weight * C``.

    Labels must be -1/+1.  ``predict`` returns 0 for points exactly on the
    decision boundary, which ``score`` counts as a miss.

    Parameters
    ----------
    C : float, default=7.0
    kernel : {"rbf", "linear"}, default="rbf"
    gamma : float or "median", default="median"
        ``"median"`` sets gamma to one over the median pairwise squared
        distance of the training points.
    tol : float, default=1e-6
    max_iter : int, default=10000
    """

    def __init__(self, C=7.0, kernel="rbf", gamma="median", tol=1e-6, max_iter=10_000):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, sample_weight=None):
        X, y = check_binary_Xy(X, y)
        w = check_sample_weight(sample_weight, X.shape[0])
        model = train_weighted_svm(X, y, w, float(self.C), self._kernel_spec(X), self.tol,
                                   self.max_iter)
        self._set_fitted(model, X.shape[1])
        return self
