"""Bayesian logistic regression with Gaussian (Laplace) posterior approximations.

Parameters are ``theta = (coef_0, ..., coef_{d-1}, intercept)``.  Every data
point contributes the logistic log-likelihood
``f_i(theta) = -log(1 + exp(-y_i * (coef . x_i + intercept)))`` scaled by a
nonnegative weight; the prior is ``N(0, variance * I)``.  Normalising
constants never appear: the KL between two Laplace fits only needs their
means and covariances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ._io import clean_zeros
from .exceptions import ConvergenceError, DimensionError, NotSPDError

__all__ = [
    "GaussianPrior",
    "GaussianApprox",
    "log_potential",
    "log_joint",
    "grad_log_joint",
    "hess_log_joint",
    "laplace_fit",
    "gaussian_kl",
]

GRAD_TOL = 1e-8
MAX_NEWTON_ITER = 100
ARMIJO = 1e-4


@dataclass(frozen=True)
class GaussianPrior:
    """Zero-mean isotropic prior ``N(0, variance * I)``."""

    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"prior variance must be positive, got {self.variance}")


@dataclass(frozen=True, eq=False)
class GaussianApprox:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float)
        p = mu.shape[0]
        if cov.shape != (p, p):
            raise DimensionError(f"covariance must be {p}x{p}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10):
            raise NotSPDError("covariance is not symmetric within 1e-10")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NotSPDError("covariance is not positive definite") from None
        for a in (mu, cov, chol):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def cholesky(self):
        return self._chol

    def to_json(self):
        return {"mean": clean_zeros(self.mean),
                "covariance": [clean_zeros(r) for r in self.covariance]}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["mean"], dtype=float), np.asarray(doc["covariance"], dtype=float))


def _log_sigmoid(t):
    # log(1 / (1 + exp(-t))) without overflow
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0, -np.log1p(np.exp(-np.abs(t))), t - np.log1p(np.exp(-np.abs(t))))


def _sigmoid(t):
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_potential(theta, x, y):
    """Logistic log-likelihood of one labelled point, overflow-safe.

    >>> round(float(log_potential([0.0, 0.0], [3.0], 1)), 6)
    -0.693147
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    if theta.shape[0] != x.shape[0] + 1:
        raise DimensionError(f"theta has length {theta.shape[0]}, expected {x.shape[0] + 1}")
    margin = float(y) * (theta[:-1] @ x + theta[-1])
    return float(_log_sigmoid(margin))


def _design(X, y):
    """Rows ``y_i * (x_i, 1)``; margins are ``design @ theta``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return y[:, None] * np.hstack([X, np.ones((X.shape[0], 1))])


def _neg_log_joint(theta, Z, w, prec):
    return 0.5 * prec * (theta @ theta) - w @ _log_sigmoid(Z @ theta)


def _neg_grad(theta, Z, w, prec):
    return prec * theta - Z.T @ (w * _sigmoid(-(Z @ theta)))


def _neg_hess(theta, Z, w, prec):
    m = Z @ theta
    curv = w * _sigmoid(m) * _sigmoid(-m)
    H = (Z.T * curv) @ Z
    H[np.diag_indices_from(H)] += prec
    return H


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise DimensionError(f"expected {n} weights, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return w


def log_joint(theta, X, y, weights, prior=GaussianPrior()):
    """Unnormalised log posterior ``log p0(theta) + sum_i w_i f_i(theta)`` (up to a constant)."""
    Z = _design(X, y)
    w = _check_weights(weights, Z.shape[0])
    return -float(_neg_log_joint(np.asarray(theta, dtype=float), Z, w, 1.0 / prior.variance))


def grad_log_joint(theta, X, y, weights, prior=GaussianPrior()):
    Z = _design(X, y)
    w = _check_weights(weights, Z.shape[0])
    return -_neg_grad(np.asarray(theta, dtype=float), Z, w, 1.0 / prior.variance)


def hess_log_joint(theta, X, y, weights, prior=GaussianPrior()):
    Z = _design(X, y)
    w = _check_weights(weights, Z.shape[0])
    return -_neg_hess(np.asarray(theta, dtype=float), Z, w, 1.0 / prior.variance)


@numba.njit(cache=False, nogil=True)
def _cholesky(A):
    p = A.shape[0]
    L = np.zeros((p, p))
    for j in range(p):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, p):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@numba.njit(cache=False, nogil=True)
def _chol_solve(L, b):
    p = L.shape[0]
    x = b.copy()
    for i in range(p):
        for k in range(i):
            x[i] -= L[i, k] * x[k]
        x[i] /= L[i, i]
    for i in range(p - 1, -1, -1):
        for k in range(i + 1, p):
            x[i] -= L[k, i] * x[k]
        x[i] /= L[i, i]
    return x


@numba.njit(cache=False, nogil=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@numba.njit(cache=False, nogil=True)
def _nlj_kernel(theta, Z, w, prec):
    n, p = Z.shape
    f = 0.5 * prec * _dot(theta, theta)
    for i in range(n):
        m = 0.0
        for j in range(p):
            m += Z[i, j] * theta[j]
        # -log sigmoid(m)
        if m >= 0:
            f += w[i] * np.log1p(np.exp(-m))
        else:
            f += w[i] * (np.log1p(np.exp(m)) - m)
    return f


@numba.njit(cache=False, nogil=True)
def _grad_hess_kernel(theta, Z, w, prec):
    n, p = Z.shape
    g = prec * theta.copy()
    H = np.zeros((p, p))
    for j in range(p):
        H[j, j] = prec
    for i in range(n):
        m = 0.0
        for j in range(p):
            m += Z[i, j] * theta[j]
        e = np.exp(-abs(m))
        if m >= 0:
            sig_pos = 1.0 / (1.0 + e)
            sig_neg = e / (1.0 + e)
        else:
            sig_pos = e / (1.0 + e)
            sig_neg = 1.0 / (1.0 + e)
        coef = w[i] * sig_neg
        curv = w[i] * sig_pos * sig_neg
        for j in range(p):
            g[j] -= coef * Z[i, j]
            for k in range(j + 1):
                H[j, k] += curv * Z[i, j] * Z[i, k]
    for j in range(p):
        for k in range(j):
            H[k, j] = H[j, k]
    return g, H


@numba.njit(cache=False, nogil=True)
def _newton_kernel(Z, w, prec, theta0, grad_tol, max_iter, armijo):
    """Returns (theta, H, status, gnorm); status 0 ok, 1 no convergence, 2 not SPD."""
    theta = theta0.copy()
    f = _nlj_kernel(theta, Z, w, prec)
    gnorm = np.inf
    for it in range(max_iter + 1):
        g, H = _grad_hess_kernel(theta, Z, w, prec)
        gnorm = np.sqrt(_dot(g, g))
        if gnorm <= grad_tol:
            return theta, H, 0, gnorm
        if it == max_iter:
            break
        L, ok = _cholesky(H)
        if not ok:
            return theta, H, 2, gnorm
        step = _chol_solve(L, g)
        slope = _dot(g, step)
        if slope <= 1e-10 * (1.0 + abs(f)):
            # Newton decrement below what f can resolve: Armijo tests are noise here
            theta = theta - step
            f = _nlj_kernel(theta, Z, w, prec)
            continue
        t = 1.0
        accepted = False
        for _ in range(60):
            cand = theta - t * step
            fc = _nlj_kernel(cand, Z, w, prec)
            if fc <= f - armijo * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            cand = theta - step
            fc = _nlj_kernel(cand, Z, w, prec)
        theta = cand
        f = fc
    return theta, H, 1, gnorm


@numba.njit(cache=False, nogil=True)
def _kl_kernel(mu_p, H_p, mu_q, P_q, logdet_P_q):
    """KL(N(mu_p, H_p^-1) || N(mu_q, P_q^-1)) from precision matrices; -1 if H_p is not SPD."""
    p = mu_p.shape[0]
    L, ok = _cholesky(H_p)
    if not ok:
        return -1.0
    trace = 0.0
    for j in range(p):
        col = _chol_solve(L, P_q[:, j].copy())
        trace += col[j]
    maha = 0.0
    for i in range(p):
        for j in range(p):
            maha += (mu_q[i] - mu_p[i]) * P_q[i, j] * (mu_q[j] - mu_p[j])
    logdet_H = 0.0
    for i in range(p):
        logdet_H += 2.0 * np.log(L[i, i])
    kl = 0.5 * (trace + maha - p + logdet_H - logdet_P_q)
    return kl if kl > 0.0 else 0.0


def _newton_mode(Z, w, prec, init=None):
    """Minimise the negative log joint; returns ``(mode, hessian_at_mode)``.

    Zero-weight rows are dropped before iterating.
    """
    w = np.asarray(w, dtype=float)
    active = w > 0
    if not np.all(active):
        Z, w = Z[active], w[active]
    Z = np.ascontiguousarray(Z, dtype=float)
    p = Z.shape[1]
    theta0 = np.zeros(p) if init is None else np.array(init, dtype=float)
    theta, H, status, gnorm = _newton_kernel(Z, np.ascontiguousarray(w), float(prec), theta0,
                                             GRAD_TOL, MAX_NEWTON_ITER, ARMIJO)
    if status == 2:
        raise NotSPDError("Hessian of the negative log joint is not positive definite")
    if status == 1:
        raise ConvergenceError(f"Newton's method did not converge in {MAX_NEWTON_ITER} "
                               "iterations", gnorm)
    return theta, H


def _approx_from(Z, w, prec, init=None):
    theta, H = _newton_mode(Z, w, prec, init)
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    return GaussianApprox(theta, cov)


def laplace_fit(ds, weights, prior=GaussianPrior(), init=None):
    """Laplace approximation of the weighted posterior for ``ds``.

    The mode is found by damped Newton iterations (Armijo backtracking by
    halving) until the gradient norm drops to 1e-8; the covariance is the
    inverse Hessian of the negative log joint at the mode.  All-zero
    weights give back the prior.

    Parameters
    ----------
    ds : BinaryDataset
    weights : array-like of shape (n_samples,)
        Nonnegative per-point weights; all ones recovers the full posterior.
    prior : GaussianPrior
    init : array-like, optional
        Starting point for Newton's method (defaults to the zero vector).

    Raises
    ------
    ConvergenceError
        If the gradient norm is still above tolerance after 100 iterations.
    """
    Z = _design(ds.features, ds.labels)
    w = _check_weights(weights, Z.shape[0])
    return _approx_from(Z, w, 1.0 / prior.variance, init)


def gaussian_kl(p, q):
    """Closed-form ``KL(p || q)`` between two multivariate Gaussians."""
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} vs {q.dim}")
    Lp, Lq = p.cholesky, q.cholesky
    A = np.linalg.solve(Lq, Lp)
    trace = float(np.sum(A * A))
    diff = np.linalg.solve(Lq, q.mean - p.mean)
    maha = float(diff @ diff)
    logdet = 2.0 * float(np.sum(np.log(np.diag(Lq))) - np.sum(np.log(np.diag(Lp))))
    kl = 0.5 * (trace + maha - p.dim + logdet)
    return max(kl, 0.0)
