"""Greedy Bayesian coreset construction against a Laplace-approximate KL objective.

The objective for a weighted support set is
``KL(laplace(weighted posterior) || laplace(full posterior))``.  Points are
added one at a time by provisional scoring, and after every addition the
support weights are refined by projected gradient descent using central
finite differences in the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._io import clean_zeros
from .dataset import BinaryDataset
from .exceptions import CoresetSizeError, DimensionError, NotSPDError
from .posterior import GaussianApprox, GaussianPrior, _design, _kl_kernel, _newton_mode
from .validation import check_binary_Xy

__all__ = [
    "CoresetConfig",
    "CoresetSelection",
    "KLObjective",
    "optimize_weights",
    "build_coreset",
    "coreset_kl",
    "BayesianCoreset",
]

FD_STEP = 1e-4
TIE_TOL = 1e-12


@dataclass(frozen=True)
class CoresetConfig:
    """Settings for :func:`build_coreset`.

    ``candidate_pool`` is ``"all"`` or the number of unselected points
    (drawn with ``seed``) scored at each greedy step.
    """

    size: int
    weight_opt_steps: int = 200
    tol: float = 1e-7
    candidate_pool: object = "all"
    seed: int = 0

    def __post_init__(self):
        if int(self.size) < 1:
            raise CoresetSizeError(f"coreset size must be >= 1, got {self.size}")
        if int(self.weight_opt_steps) < 1:
            raise ValueError("weight_opt_steps must be >= 1")
        if self.candidate_pool != "all" and int(self.candidate_pool) < 1:
            raise ValueError("candidate_pool must be 'all' or a positive integer")


@dataclass(frozen=True, eq=False)
class CoresetSelection:
    """Selected indices (in selection order), their weights and the achieved KL.

    ``kl_path[k]`` is the KL after the (k+1)-th greedy step, so the last
    entry equals ``achieved_kl``.
    """

    indices: np.ndarray
    weights: np.ndarray
    achieved_kl: float
    source_size: int
    kl_path: tuple = field(default=())

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if idx.shape != w.shape:
            raise DimensionError("indices and weights must have equal length")
        if len(set(idx.tolist())) != idx.size:
            raise ValueError("coreset indices must be distinct")
        if idx.size > self.source_size or np.any(idx < 0):
            raise ValueError("coreset indices out of range")
        if np.any(w < 0):
            raise ValueError("coreset weights must be nonnegative")
        if self.achieved_kl < 0:
            raise ValueError("achieved_kl must be nonnegative")
        w = w + 0.0
        idx.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kl_path", tuple(float(v) for v in self.kl_path))

    @property
    def size(self):
        return self.indices.shape[0]

    def full_weights(self):
        """Weights scattered into a length-``source_size`` vector."""
        out = np.zeros(self.source_size)
        out[self.indices] = self.weights
        return out

    def to_json(self):
        return {
            "indices": [int(i) for i in self.indices],
            "weights": clean_zeros(self.weights),
            "achieved_kl": float(self.achieved_kl),
            "source_size": int(self.source_size),
            "kl_path": [float(v) for v in self.kl_path],
        }

    @classmethod
    def from_json(cls, doc):
        return cls(doc["indices"], doc["weights"], float(doc["achieved_kl"]),
                   int(doc["source_size"]), tuple(doc.get("kl_path", ())))


class KLObjective:
    """``KL(laplace(w) || laplace(1))`` for sparse weight vectors on one dataset.

    Every weighted fit starts Newton's method from the full-data mode, so a
    given (support, weights) pair always yields the same number.
    """

    def __init__(self, ds, prior=GaussianPrior()):
        self.ds = ds
        self.prior = prior
        self.Z = _design(ds.features, ds.labels)
        self.prec = 1.0 / prior.variance
        self.n = self.Z.shape[0]
        theta, H = _newton_mode(self.Z, np.ones(self.n), self.prec)
        cov = np.linalg.inv(H)
        self.full = GaussianApprox(theta, 0.5 * (cov + cov.T))
        self._full_prec = np.ascontiguousarray(H)
        self._full_logdet_prec = 2.0 * float(np.sum(np.log(np.diag(np.linalg.cholesky(H)))))

    def fit(self, support, weights):
        support = np.asarray(support, dtype=np.int64)
        w = np.asarray(weights, dtype=float)
        return _newton_mode(self.Z[support], w, self.prec, init=self.full.mean)

    def approx(self, support, weights):
        theta, H = self.fit(support, weights)
        cov = np.linalg.inv(H)
        return GaussianApprox(theta, 0.5 * (cov + cov.T))

    def __call__(self, support, weights):
        theta, H = self.fit(support, weights)
        kl = _kl_kernel(theta, H, self.full.mean, self._full_prec, self._full_logdet_prec)
        if kl < 0:
            raise NotSPDError("weighted posterior Hessian is not positive definite")
        return float(kl)


def _fd_gradient(objective, support, w, f0):
    g = np.empty_like(w)
    for j in range(w.shape[0]):
        h = FD_STEP * max(abs(w[j]), 1.0)
        up = w.copy()
        up[j] += h
        if w[j] >= h:
            down = w.copy()
            down[j] -= h
            g[j] = (objective(support, up) - objective(support, down)) / (2.0 * h)
        else:
            g[j] = (objective(support, up) - f0) / h
    return g


def _descend(objective, support, w, steps, tol, memory=10):
    """Projected gradient descent with Barzilai-Borwein steps.

    The backtracking test compares against the worst of the last ``memory``
    objective values (non-monotone line search), and the best point seen is
    returned, so the result never scores worse than the start.
    """
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    f = objective(support, w)
    if w.size == 0:
        return w, f
    best_w, best_f = w, f
    recent = [f]
    g = _fd_gradient(objective, support, w, f)
    gnorm = float(np.sqrt(g @ g))
    if gnorm == 0.0 or not np.isfinite(gnorm):
        return w, f
    eta = max(float(np.sqrt(w @ w)), 1.0) / gnorm
    stall = 0
    for _ in range(steps):
        if best_f <= 0.0:
            break
        ref = max(recent)
        accepted = False
        for _ in range(50):
            cand = np.maximum(w - eta * g, 0.0)
            moved = w - cand
            if not np.any(moved):
                break
            fc = objective(support, cand)
            if fc <= ref - 1e-4 * float(g @ moved):
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        g_new = _fd_gradient(objective, support, cand, fc)
        s, dg = cand - w, g_new - g
        sy = float(s @ dg)
        eta = float(s @ s) / sy if sy > 0 else 2.0 * eta
        w, f, g = cand, fc, g_new
        recent = (recent + [f])[-memory:]
        if f < best_f:
            rel = (best_f - f) / max(best_f, 1e-300)
            best_w, best_f = w, f
            stall = stall + 1 if rel < tol else 0
        else:
            stall += 1
        if stall >= memory:
            break
    return best_w, best_f


def optimize_weights(ds, support, init, prior=GaussianPrior(), cfg=None, objective=None):
    """Refine the weights of a fixed support set.

    Projected gradient descent on the Laplace-KL objective, with gradients
    by finite differences in the weights (step 1e-4 relative) and a
    backtracking step.  The result never scores worse than ``init``.

    Returns
    -------
    ndarray
        Nonnegative weights aligned with ``support``.
    """
    cfg = cfg or CoresetConfig(size=max(len(support), 1))
    support = np.asarray(support, dtype=np.int64).reshape(-1)
    init = np.asarray(init, dtype=float).reshape(-1)
    if support.shape != init.shape:
        raise DimensionError("init must have one weight per support index")
    if len(set(support.tolist())) != support.size:
        raise ValueError("support indices must be distinct")
    if support.size and (support.min() < 0 or support.max() >= ds.n_samples):
        raise IndexError("support index out of range")
    if np.any(init < 0):
        raise ValueError("init weights must be nonnegative")
    objective = objective or KLObjective(ds, prior)
    w, _ = _descend(objective, support, init, int(cfg.weight_opt_steps), float(cfg.tol))
    return w


def _candidates(n, chosen, cfg, rng):
    pool = np.array([i for i in range(n) if i not in chosen], dtype=np.int64)
    if cfg.candidate_pool != "all" and pool.size > int(cfg.candidate_pool):
        pool = np.sort(rng.choice(pool, size=int(cfg.candidate_pool), replace=False))
    return pool


def build_coreset(ds, prior=GaussianPrior(), cfg=None, objective=None):
    """Greedy coreset of ``cfg.size`` points with refined nonnegative weights.

    At step ``k`` (0-based) each unselected point is scored by the KL
    reached when it joins at weight ``N / (k + 1)`` with the current
    weights held fixed; the best score wins, ties going to the lowest
    index.  The newcomer then starts at ``N / M`` and all weights are
    refined with :func:`optimize_weights`.  A step never ends worse than
    the previous one: the newcomer at zero is always a fallback, and once
    all ``N`` points are in, so are unit weights.
    """
    if cfg is None:
        raise ValueError("build_coreset needs a CoresetConfig")
    n = ds.n_samples
    M = int(cfg.size)
    if not 1 <= M <= n:
        raise CoresetSizeError(f"coreset size {M} must lie in [1, {n}]")
    objective = objective or KLObjective(ds, prior)
    rng = np.random.default_rng(cfg.seed)
    chosen, weights = [], np.zeros(0)
    f = objective([], [])
    path = []
    for k in range(M):
        provisional = n / (k + 1)
        best, best_val = -1, np.inf
        for c in _candidates(n, set(chosen), cfg, rng):
            val = objective(chosen + [int(c)], np.append(weights, provisional))
            if val < best_val - TIE_TOL * max(1.0, abs(best_val)) or best < 0:
                best, best_val = int(c), val
        chosen.append(best)
        w_new, f_new = _descend(objective, chosen, np.append(weights, n / M),
                                int(cfg.weight_opt_steps), float(cfg.tol))
        if f_new > f:
            # keeping the old weights with the newcomer at zero is always feasible
            w_alt, f_alt = _descend(objective, chosen, np.append(weights, 0.0),
                                    int(cfg.weight_opt_steps), float(cfg.tol))
            if f_alt < f_new:
                w_new, f_new = w_alt, f_alt
        if len(chosen) == n:
            # with every point selected, unit weights reproduce the full posterior
            f_ones = objective(chosen, np.ones(n))
            if f_ones < f_new:
                w_new, f_new = np.ones(n), f_ones
        weights, f = w_new, f_new
        path.append(f)
    return CoresetSelection(np.array(chosen), weights, f, n, tuple(path))


def coreset_kl(ds, sel, prior=GaussianPrior(), objective=None):
    """KL between the coreset's Laplace posterior and the full-data one."""
    if sel.source_size != ds.n_samples:
        raise DimensionError(f"selection was built on {sel.source_size} points, "
                             f"dataset has {ds.n_samples}")
    if sel.size and sel.indices.max() >= ds.n_samples:
        raise IndexError("selection index out of range")
    objective = objective or KLObjective(ds, prior)
    return objective(sel.indices, sel.weights)


class BayesianCoreset(BaseEstimator):
    """Scikit-learn style wrapper around :func:`build_coreset`.

    Parameters
    ----------
    coreset_size : int or float, default=0.2
        Absolute size, or a fraction of the training set when below 1.
    prior_variance : float, default=1.0
    weight_opt_steps : int, default=200
    tol : float, default=1e-7
    candidate_pool : "all" or int, default="all"
    random_state : int, default=0

    Attributes
    ----------
    selection_ : CoresetSelection
    indices_, weights_ : ndarray
    achieved_kl_ : float
    """

    def __init__(self, coreset_size=0.2, prior_variance=1.0, weight_opt_steps=200,
                 tol=1e-7, candidate_pool="all", random_state=0):
        self.coreset_size = coreset_size
        self.prior_variance = prior_variance
        self.weight_opt_steps = weight_opt_steps
        self.tol = tol
        self.candidate_pool = candidate_pool
        self.random_state = random_state

    def _resolve_size(self, n):
        size = self.coreset_size
        if isinstance(size, float) and size < 1.0:
            return max(1, int(round(size * n)))
        return int(size)

    def fit(self, X, y):
        X, y = check_binary_Xy(X, y)
        ds = BinaryDataset(X, y)
        cfg = CoresetConfig(self._resolve_size(X.shape[0]), self.weight_opt_steps, self.tol,
                            self.candidate_pool, self.random_state)
        sel = build_coreset(ds, GaussianPrior(self.prior_variance), cfg)
        self.selection_ = sel
        self.indices_ = np.asarray(sel.indices)
        self.weights_ = np.asarray(sel.weights)
        self.achieved_kl_ = sel.achieved_kl
        self.n_features_in_ = X.shape[1]
        return self

    def fit_resample(self, X, y):
        """Fit, then return ``(X_coreset, y_coreset, weights)``."""
        self.fit(X, y)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        return X[self.indices_], y[self.indices_], self.weights_.copy()

    def kl_of(self, X, y, indices, weights):
        """KL of an arbitrary weighted subset of ``(X, y)`` (for baselines)."""
        check_is_fitted(self, "selection_")
        X, y = check_binary_Xy(X, y)
        ds = BinaryDataset(X, y)
        sel = CoresetSelection(indices, weights, 0.0, X.shape[0])
        return coreset_kl(ds, sel, GaussianPrior(self.prior_variance))
