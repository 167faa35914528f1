"""QUBO form of the weighted SVM dual and two classical solvers for it.

Each dual coefficient is encoded by ``K`` bits as ``alpha_i = sum_k B**k z[K*i + k]``
(optionally scaled by the point weight).  The equality constraint becomes
the penalty ``lam * (sum_i alpha_i y_i)**2`` so that, for every bit vector,

    energy(Q, z) == dual_objective(alpha(z)) + lam * (sum_i alpha_i y_i)**2

``Q`` is stored upper-triangular: off-diagonal couplings of a symmetric
quadratic form are folded (doubled) into the upper triangle and the linear
terms sit on the diagonal.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import DimensionError, ProblemTooLargeError, SingleClassError
from .svm import (
    SvmModel,
    _bias,
    _KernelClassifierBase,
    gram_matrix,
)
from .validation import check_binary_Xy, check_sample_weight

__all__ = [
    "EncodingSpec",
    "QuboProblem",
    "BinarySolution",
    "AnnealSchedule",
    "alpha_from_bits",
    "build_qubo",
    "energy",
    "solve_exhaustive",
    "solve_anneal",
    "greedy_descent",
    "decode_alphas",
    "decode_model",
    "QuboSVC",
]

MAX_EXHAUSTIVE_DIM = 26


@dataclass(frozen=True)
class EncodingSpec:
    """Binary encoding of each dual coefficient.

    ``weighting="encoded"`` multiplies point ``i``'s decoded value by its
    weight, giving per-point boxes ``[0, w_i * alpha_max]``; ``"none"``
    ignores the weights.
    """

    base: int = 2
    bits: int = 3
    penalty: float = 1.0
    weighting: str = "none"

    def __post_init__(self):
        if int(self.base) < 1 or int(self.bits) < 1:
            raise ValueError("base and bits must both be >= 1")
        if not self.penalty >= 0:
            raise ValueError("penalty must be >= 0")
        if self.weighting not in ("none", "encoded"):
            raise ValueError(f"weighting must be 'none' or 'encoded', got {self.weighting!r}")
        object.__setattr__(self, "base", int(self.base))
        object.__setattr__(self, "bits", int(self.bits))
        object.__setattr__(self, "penalty", float(self.penalty))

    @property
    def alpha_max(self):
        if self.base == 1:
            return float(self.bits)
        return float((self.base ** self.bits - 1) // (self.base - 1))

    @property
    def place_values(self):
        return np.array([float(self.base) ** k for k in range(self.bits)])

    def to_json(self):
        return {"base": self.base, "bits": self.bits, "lambda": self.penalty,
                "weighting": self.weighting}

    @classmethod
    def from_json(cls, doc):
        return cls(int(doc["base"]), int(doc["bits"]), float(doc["lambda"]),
                   doc.get("weighting", "none"))


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """Upper-triangular QUBO over ``n_points * bits`` binary variables."""

    Q: np.ndarray
    encoding: EncodingSpec = field(default_factory=EncodingSpec)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("Q has non-finite entries")
        if np.any(np.tril(Q, -1) != 0):
            raise ValueError("Q must be upper triangular")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def dim(self):
        return self.Q.shape[0]

    @property
    def n_points(self):
        return self.dim // self.encoding.bits

    def bit_index(self, i, k):
        return self.encoding.bits * i + k

    def symmetric(self):
        """``(S, d)`` with zero-diagonal symmetric couplings ``S`` and diagonal ``d``."""
        d = np.diag(self.Q).copy()
        U = np.triu(self.Q, 1)
        return U + U.T, d

    def to_json(self):
        rows, cols = np.nonzero(np.triu(self.Q))
        entries = [[int(r), int(c), float(self.Q[r, c])] for r, c in zip(rows, cols)]
        return {"dim": self.dim, "entries": entries, "encoding": self.encoding.to_json(),
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, doc):
        dim = int(doc["dim"])
        Q = np.zeros((dim, dim))
        for r, c, v in doc["entries"]:
            r, c = int(r), int(c)
            if not (0 <= r <= c < dim):
                raise ValueError(f"entry ({r}, {c}) is outside the upper triangle of a "
                                 f"{dim}x{dim} problem")
            Q[r, c] = float(v)
        return cls(Q, EncodingSpec.from_json(doc["encoding"]), doc.get("provenance", {}))


@dataclass(frozen=True, eq=False)
class BinarySolution:
    z: np.ndarray
    energy: float

    def __post_init__(self):
        z = np.array(self.z, dtype=np.int8).reshape(-1)
        if np.any((z != 0) & (z != 1)):
            raise ValueError("bits must be 0 or 1")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "energy", float(self.energy))

    def to_json(self):
        return {"z": [int(b) for b in self.z], "energy": self.energy + 0.0}

    @classmethod
    def from_json(cls, doc):
        return cls(doc["z"], float(doc["energy"]))


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling from ``t_start`` to ``t_end`` over ``sweeps`` sweeps.

    ``None`` temperatures are resolved per problem: ``t_start`` to the
    largest absolute entry of Q and ``t_end`` to ``1e-3 * t_start``.
    """

    sweeps: int = 200
    restarts: int = 32
    t_start: float | None = None
    t_end: float | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.sweeps) < 1 or int(self.restarts) < 1:
            raise ValueError("sweeps and restarts must be >= 1")
        if self.t_start is not None and not self.t_start > 0:
            raise ValueError("t_start must be positive")
        if self.t_end is not None and not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.t_start is not None and self.t_end is not None and not self.t_start > self.t_end:
            raise ValueError("t_start must exceed t_end")

    def temperatures(self, q=None):
        t0 = self.t_start
        if t0 is None:
            scale = float(np.max(np.abs(q.Q))) if q is not None and q.dim else 0.0
            t0 = scale if scale > 0 else 1.0
        t1 = self.t_end if self.t_end is not None else 1e-3 * t0
        if self.sweeps == 1:
            return np.array([t0])
        frac = np.arange(self.sweeps) / (self.sweeps - 1)
        return t0 * (t1 / t0) ** frac


# -- encoding and construction -------------------------------------------------


def alpha_from_bits(bits, enc, point_weight=1.0):
    """Decode one coefficient; bit ``k`` carries place value ``base**k``."""
    bits = np.asarray(bits).reshape(-1)
    if bits.shape[0] != enc.bits:
        raise DimensionError(f"expected {enc.bits} bits, got {bits.shape[0]}")
    s = float(enc.place_values @ bits)
    return point_weight * s if enc.weighting == "encoded" else s


def _scales(weights, enc):
    """Per-bit multiplier ``u_i * base**k`` in flat bit order."""
    w = np.asarray(weights, dtype=float)
    u = w if enc.weighting == "encoded" else np.ones_like(w)
    return (u[:, None] * enc.place_values[None, :]).reshape(-1)


def _fingerprint(points, labels, weights):
    h = hashlib.sha256()
    for a in (points, labels, weights):
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()


def build_qubo(points, labels, weights, spec, enc):
    """QUBO whose energy equals the penalised weighted SVM dual at the decoded alphas."""
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    w = check_sample_weight(weights, X.shape[0])
    if X.ndim != 2 or y.shape[0] != X.shape[0]:
        raise DimensionError("points and labels disagree in length")
    if X.shape[0] < 2 or not ((y == 1).any() and (y == -1).any()):
        raise SingleClassError("build_qubo needs at least one point of each label")
    K = gram_matrix(spec, X)
    s = _scales(w, enc)
    yb = np.repeat(y, enc.bits)
    Kb = np.repeat(np.repeat(K, enc.bits, axis=0), enc.bits, axis=1)
    P = np.outer(s * yb, s * yb) * (0.5 * Kb + enc.penalty)
    Q = 2.0 * np.triu(P, 1)
    Q[np.diag_indices_from(Q)] = np.diag(P) - s
    prov = {"kernel": spec.to_json(), "n_points": int(X.shape[0]),
            "fingerprint": _fingerprint(X, y, w)}
    return QuboProblem(Q, enc, prov)


def energy(q, z):
    """``z' Q z`` with each unordered pair counted once."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != q.dim:
        raise DimensionError(f"bit vector has length {z.shape[0]}, problem has {q.dim}")
    return float(z @ q.Q @ z)


def decode_alphas(q, z, weights):
    enc = q.encoding
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != q.dim:
        raise DimensionError(f"bit vector has length {z.shape[0]}, problem has {q.dim}")
    w = np.asarray(weights, dtype=float).reshape(-1)
    return np.array([alpha_from_bits(z[enc.bits * i:enc.bits * (i + 1)], enc, w[i])
                     for i in range(q.n_points)])


# -- solvers --------------------------------------------------------------------


@numba.njit(cache=False, nogil=True)
def _lex_less(a, b):
    for k in range(a.shape[0]):
        if a[k] != b[k]:
            return a[k] < b[k]
    return False


@numba.njit(cache=False, nogil=True)
def _gray_walk(S, diag, tie_tol, record):
    n = diag.shape[0]
    z = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)
    best_z = z.copy()
    best = 0.0
    e = 0.0
    total = 1 << n
    trace = np.zeros(total if record else 0)
    for t in range(1, total):
        b = 0
        while not (t >> b) & 1:
            b += 1
        if z[b] == 0:
            e += diag[b] + h[b]
            z[b] = 1
            for a in range(n):
                h[a] += S[a, b]
        else:
            e -= diag[b] + h[b]
            z[b] = 0
            for a in range(n):
                h[a] -= S[a, b]
        if record:
            trace[t] = e
        if e < best - tie_tol:
            best = e
            best_z[:] = z
        elif e <= best + tie_tol and _lex_less(z, best_z):
            best = min(best, e)
            best_z[:] = z
    return best_z, trace


def _gray_trace(q):
    """Incremental energies of the Gray-code walk; entry ``t`` belongs to ``t ^ (t >> 1)``."""
    S, d = q.symmetric()
    _, trace = _gray_walk(S, d, 0.0, True)
    return trace


def solve_exhaustive(q):
    """Global minimum by enumerating all ``2**dim`` states in Gray-code order.

    Energies are updated incrementally by single bit flips.  States whose
    energy is within rounding of the best are tie-broken towards the
    lexicographically smallest ``z``.
    """
    if q.dim > MAX_EXHAUSTIVE_DIM:
        raise ProblemTooLargeError(f"exhaustive search is capped at {MAX_EXHAUSTIVE_DIM} bits, "
                                   f"problem has {q.dim}")
    if q.dim == 0:
        return BinarySolution(np.zeros(0), 0.0)
    S, d = q.symmetric()
    tie_tol = 1e-10 * (1.0 + float(np.max(np.abs(q.Q))))
    z, _ = _gray_walk(S, d, tie_tol, False)
    return BinarySolution(z, energy(q, z))


@numba.njit(cache=False, nogil=True)
def _fields(S, z):
    n = z.shape[0]
    h = np.zeros(n)
    for b in range(n):
        if z[b]:
            for a in range(n):
                h[a] += S[a, b]
    return h


@numba.njit(cache=False, nogil=True)
def _descend_inplace(S, diag, z, h):
    n = diag.shape[0]
    while True:
        best_a = -1
        best_delta = 0.0
        for a in range(n):
            delta = (1 - 2 * z[a]) * (diag[a] + h[a])
            if delta < best_delta:
                best_delta = delta
                best_a = a
        if best_a < 0:
            return
        sign = 1.0 if z[best_a] == 0 else -1.0
        z[best_a] = 1 - z[best_a]
        for a in range(n):
            h[a] += sign * S[a, best_a]


@numba.njit(cache=False, nogil=True)
def _anneal_run(S, diag, z0, temps, uniforms):
    n = diag.shape[0]
    z = z0.copy()
    h = _fields(S, z)
    e = 0.0
    for a in range(n):
        e += z[a] * (diag[a] + 0.5 * h[a])
    best = e
    best_z = z.copy()
    for s in range(temps.shape[0]):
        T = temps[s]
        for a in range(n):
            delta = (1 - 2 * z[a]) * (diag[a] + h[a])
            if delta <= 0.0 or uniforms[s, a] < np.exp(-delta / T):
                sign = 1.0 if z[a] == 0 else -1.0
                z[a] = 1 - z[a]
                e += delta
                for c in range(n):
                    h[c] += sign * S[c, a]
                if e < best:
                    best = e
                    best_z[:] = z
    _descend_inplace(S, diag, best_z, _fields(S, best_z))
    return best_z


def greedy_descent(q, z):
    """Steepest single-bit-flip descent until no flip lowers the energy."""
    S, d = q.symmetric()
    z = np.array(z, dtype=np.int8)
    _descend_inplace(S, d, z, _fields(S, z))
    return BinarySolution(z, energy(q, z))


def _restart(q, S, d, temps, sched, r):
    rng = np.random.default_rng([int(sched.seed), int(r)])
    z0 = rng.integers(0, 2, size=q.dim).astype(np.int8)
    uniforms = rng.random((temps.shape[0], q.dim))
    z = _anneal_run(S, d, z0, temps, uniforms)
    return z, energy(q, z)


def solve_anneal(q, sched=None, n_jobs=1):
    """Simulated annealing with independent restarts, best solution kept.

    Restart ``r`` draws its start state and acceptance uniforms from
    ``default_rng([seed, r])``, so raising ``restarts`` only adds runs and
    the returned energy can only improve.  Each sweep proposes every bit
    once in index order under the Metropolis rule; each restart's best
    state is finished by a greedy descent.  Ties across restarts resolve to
    the lexicographically smallest ``z``.
    """
    sched = sched or AnnealSchedule()
    if q.dim == 0:
        return BinarySolution(np.zeros(0), 0.0)
    S, d = q.symmetric()
    temps = sched.temperatures(q)
    runs = range(int(sched.restarts))
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=int(n_jobs)) as ex:
            results = list(ex.map(lambda r: _restart(q, S, d, temps, sched, r), runs))
    else:
        results = [_restart(q, S, d, temps, sched, r) for r in runs]
    best_z, best_e = min(results, key=lambda t: (t[1], tuple(int(b) for b in t[0])))
    return BinarySolution(best_z, best_e)


# -- back to an SVM -----------------------------------------------------------------


def decode_model(q, sol, points, labels, weights, spec, enc=None):
    """Turn a bit vector into an :class:`SvmModel` with bias from the weighted formula.

    ``C`` is ``alpha_max``.  With ``weighting="none"`` the model carries unit
    weights (every box is ``[0, alpha_max]``); with ``"encoded"`` it keeps
    the point weights.  The equality constraint is not repaired.
    """
    enc = enc or q.encoding
    X = np.asarray(points, dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    w = check_sample_weight(weights, X.shape[0])
    if X.shape[0] * enc.bits != q.dim:
        raise DimensionError(f"{X.shape[0]} points x {enc.bits} bits != problem size {q.dim}")
    alphas = decode_alphas(q, sol.z, w)
    model_w = w if enc.weighting == "encoded" else np.ones_like(w)
    C = enc.alpha_max
    b = _bias(gram_matrix(spec, X), y, alphas, model_w * C)
    return SvmModel(X, y, model_w, alphas, b, C, spec)


class QuboSVC(_KernelClassifierBase):
    """Weighted kernel SVM trained through its QUBO form.

    Parameters
    ----------
    base, bits : int, default=2, 3
        Encoding ``alpha = sum_k base**k z_k``; the box is ``[0, alpha_max]``.
    penalty : float, default=1.0
        Weight of the squared equality-constraint residual.
    weighting : {"none", "encoded"}, default="none"
    kernel : {"rbf", "linear"}, default="rbf"
    gamma : float or "median", default="median"
    solver : {"anneal", "exhaustive"}, default="anneal"
    sweeps, restarts : int, default=200, 32
    t_start, t_end : float or None
    random_state : int, default=0
    n_jobs : int, default=1
        Threads used for annealing restarts.

    Attributes
    ----------
    qubo_ : QuboProblem
    solution_ : BinarySolution
    equality_residual_ : float
        ``|sum_i alpha_i y_i|`` of the decoded model.
    """

    def __init__(self, base=2, bits=3, penalty=1.0, weighting="none", kernel="rbf",
                 gamma="median", solver="anneal", sweeps=200, restarts=32, t_start=None,
                 t_end=None, random_state=0, n_jobs=1):
        self.base = base
        self.bits = bits
        self.penalty = penalty
        self.weighting = weighting
        self.kernel = kernel
        self.gamma = gamma
        self.solver = solver
        self.sweeps = sweeps
        self.restarts = restarts
        self.t_start = t_start
        self.t_end = t_end
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None):
        X, y = check_binary_Xy(X, y)
        w = check_sample_weight(sample_weight, X.shape[0])
        spec = self._kernel_spec(X)
        enc = EncodingSpec(self.base, self.bits, self.penalty, self.weighting)
        q = build_qubo(X, y, w, spec, enc)
        if self.solver == "exhaustive":
            sol = solve_exhaustive(q)
        elif self.solver == "anneal":
            sched = AnnealSchedule(self.sweeps, self.restarts, self.t_start, self.t_end,
                                   self.random_state)
            sol = solve_anneal(q, sched, self.n_jobs)
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        model = decode_model(q, sol, X, y, w, spec, enc)
        self.qubo_ = q
        self.solution_ = sol
        self.equality_residual_ = model.equality_residual
        self._set_fitted(model, X.shape[1])
        return self
