"""Labelled feature data: CSV ingestion, standardisation, PCA, pair extraction, splitting.

The CSV layout is a header ``f_0,...,f_{D-1},label`` followed by one sample
per row.  PCA is computed from the sample covariance with cyclic Jacobi
rotations so the result does not depend on an external eigensolver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._io import clean_zeros, write_text_atomic
from .exceptions import (
    ClassLookupError,
    DimensionError,
    InsufficientDataError,
    MissingFileError,
    NonIntegerLabelError,
    NonNumericFeatureError,
    ParseError,
    RaggedRowError,
)

__all__ = [
    "RawDataset",
    "BinaryDataset",
    "PcaTransform",
    "JacobiPCA",
    "load_csv",
    "write_csv",
    "standardize",
    "pca_reduce",
    "fit_pca",
    "jacobi_eigh",
    "select_pair",
    "split_indices",
    "split",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RawDataset:
    """N x D feature matrix with integer class ids."""

    features: np.ndarray
    labels: np.ndarray
    class_names: dict = field(default_factory=dict)

    def __post_init__(self):
        X = _frozen(self.features)
        y = _frozen(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DimensionError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        names = dict(self.class_names) if self.class_names else {}
        for c in np.unique(y):
            names.setdefault(int(c), str(int(c)))
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", names)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


@dataclass(frozen=True)
class BinaryDataset:
    """Two-class dataset with labels in {-1, +1}.

    ``pair`` records the source class ids; the first maps to +1.
    """

    features: np.ndarray
    labels: np.ndarray
    pair: tuple = (1, -1)

    def __post_init__(self):
        X = _frozen(self.features)
        y = _frozen(self.labels)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DimensionError(f"features must be 2-D with d >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DimensionError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("binary labels must be -1 or +1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "pair", tuple(int(c) for c in self.pair))

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return BinaryDataset(self.features[idx], self.labels[idx], self.pair)

    def with_features(self, features):
        return BinaryDataset(features, self.labels, self.pair)


@dataclass(frozen=True)
class PcaTransform:
    """Affine map ``((x - means) / scales) @ components.T``.

    A transform with zero components is the "partial" transform produced by
    :func:`standardize` alone.
    """

    column_means: np.ndarray
    column_scales: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        means = _frozen(self.column_means)
        scales = _frozen(self.column_scales)
        D = means.shape[0]
        comps = _frozen(self.components).reshape(-1, D)
        ev = _frozen(self.explained_variance).reshape(-1)
        if scales.shape != (D,) or np.any(scales <= 0):
            raise ValueError("column_scales must be D positive reals")
        if ev.shape[0] != comps.shape[0]:
            raise ValueError("one explained variance per component is required")
        object.__setattr__(self, "column_means", means)
        object.__setattr__(self, "column_scales", scales)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", ev)

    @property
    def n_components(self):
        return self.components.shape[0]

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.column_means.shape[0]:
            raise DimensionError(
                f"expected {self.column_means.shape[0]} features, got {X.shape[-1]}"
            )
        return (X - self.column_means) / self.column_scales

    def transform(self, X):
        Z = self.standardize(X)
        if self.n_components == 0:
            return Z
        return Z @ self.components.T

    def to_json(self):
        return {
            "means": clean_zeros(self.column_means),
            "scales": clean_zeros(self.column_scales),
            "components": [clean_zeros(row) for row in self.components],
            "explained_variance": clean_zeros(self.explained_variance),
        }

    @classmethod
    def from_json(cls, doc):
        means = np.asarray(doc["means"], dtype=float)
        comps = np.asarray(doc["components"], dtype=float).reshape(-1, means.shape[0])
        return cls(means, np.asarray(doc["scales"], dtype=float), comps,
                   np.asarray(doc["explained_variance"], dtype=float))


# -- CSV ---------------------------------------------------------------------


def load_csv(path, class_names=None):
    """Read a ``f_0,...,f_{D-1},label`` CSV into a :class:`RawDataset`.

    Row numbers in error messages are file line numbers (header = 1).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header expected", row=1) from None
        header = [h.strip() for h in header]
        D = len(header) - 1
        expected = [f"f_{j}" for j in range(D)] + ["label"]
        if D < 1 or header != expected:
            raise ParseError(
                f"header must be f_0,...,f_{{D-1}},label; got {','.join(header)}", row=1
            )
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != D + 1:
                raise RaggedRowError(f"expected {D + 1} fields, found {len(rec)}", row=lineno)
            values = []
            for j, cell in enumerate(rec[:D]):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericFeatureError(
                        f"feature f_{j} is not numeric: {cell.strip()!r}", row=lineno
                    ) from None
                if not math.isfinite(v):
                    raise NonNumericFeatureError(f"feature f_{j} is not finite: {cell.strip()!r}",
                                                 row=lineno)
                values.append(v)
            try:
                lab = int(rec[D].strip())
            except ValueError:
                raise NonIntegerLabelError(f"label is not an integer: {rec[D].strip()!r}",
                                           row=lineno) from None
            rows.append(values)
            labels.append(lab)
    if not rows:
        raise ParseError("file has a header but no data rows")
    return RawDataset(np.array(rows, dtype=float), np.array(labels, dtype=np.int64),
                      class_names or {})


def write_csv(path, features, labels):
    """Write features/labels in the loader's layout with 17 significant digits."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    lines = [",".join([f"f_{j}" for j in range(X.shape[1])] + ["label"])]
    for row, lab in zip(X, y):
        lines.append(",".join(f"{v:.17g}" for v in row) + f",{int(lab)}")
    write_text_atomic(path, "\n".join(lines) + "\n")


# -- standardisation and PCA --------------------------------------------------


def _standardize_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"standardisation needs at least 2 samples, got {X.shape[0]}")
    means = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    constant = np.all(X == X[0], axis=0)
    scales = np.where(constant | (sd == 0), 1.0, sd)
    Z = (X - means) / scales
    Z[:, constant] = 0.0
    return Z, means, scales


def standardize(ds):
    """Centre each column and scale it to unit sample standard deviation.

    Constant columns become all-zero and keep scale 1.  Returns the new
    dataset and a :class:`PcaTransform` carrying only means and scales.
    """
    Z, means, scales = _standardize_matrix(ds.features)
    D = Z.shape[1]
    partial = PcaTransform(means, scales, np.zeros((0, D)), np.zeros(0))
    return _replace_features(ds, Z), partial


def jacobi_eigh(A, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns, in
    the diagonal's original order (unsorted).
    """
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("jacobi_eigh needs a square matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q]
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    return np.diag(A).copy(), V


def _sign_fix(vectors, rel=1e-12):
    """Flip each row so that its first non-negligible coordinate is positive."""
    out = vectors.copy()
    for r in range(out.shape[0]):
        row = out[r]
        thresh = rel * np.max(np.abs(row)) if row.size else 0.0
        nz = np.flatnonzero(np.abs(row) > thresh)
        if nz.size and row[nz[0]] < 0:
            out[r] = -row
    return out


def _pca_components(Z, d):
    n, D = Z.shape
    if not 1 <= d <= D:
        raise DimensionError(f"cannot keep {d} components of {D}-dimensional data")
    if n < 2:
        raise InsufficientDataError("PCA needs at least 2 samples")
    means = Z.mean(axis=0)
    Zc = Z - means
    cov = Zc.T @ Zc / (n - 1)
    evals, evecs = jacobi_eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    comps = _sign_fix(evecs[:, order].T)
    return means, comps[:d], evals[:d], evals


def pca_reduce(ds, d):
    """Project centred data onto the top-``d`` eigenvectors of its sample covariance.

    Expects standardised input.  The returned transform centres by the
    input's own column means (scale 1).
    """
    means, comps, ev, _ = _pca_components(ds.features, d)
    reduced = (ds.features - means) @ comps.T
    tf = PcaTransform(means, np.ones_like(means), comps, ev)
    return _replace_features(ds, reduced), tf


def fit_pca(ds, d):
    """Standardise then reduce; returns the reduced dataset and the composed transform."""
    std_ds, partial = standardize(ds)
    reduced, inner = pca_reduce(std_ds, d)
    # ((x - m) / s - m2) == (x - (m + s * m2)) / s
    means = partial.column_means + partial.column_scales * inner.column_means
    tf = PcaTransform(means, partial.column_scales, inner.components, inner.explained_variance)
    return reduced, tf


def _replace_features(ds, features):
    if isinstance(ds, BinaryDataset):
        return ds.with_features(features)
    return RawDataset(features, ds.labels, ds.class_names)


class JacobiPCA(TransformerMixin, BaseEstimator):
    """Standardise-then-PCA transformer backed by :func:`jacobi_eigh`.

    Parameters
    ----------
    n_components : int, default=2
        Number of principal components to keep.
    standardize : bool, default=True
        Scale columns to zero mean and unit sample standard deviation
        before the eigen-decomposition.
    """

    def __init__(self, n_components=2, standardize=True):
        self.n_components = n_components
        self.standardize = standardize

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        if self.standardize:
            Z, means, scales = _standardize_matrix(X)
        else:
            Z, means, scales = X, np.zeros(X.shape[1]), np.ones(X.shape[1])
        inner_means, comps, ev, all_ev = _pca_components(Z, int(self.n_components))
        self.transform_ = PcaTransform(means + scales * inner_means, scales, comps, ev)
        self.components_ = self.transform_.components
        self.explained_variance_ = self.transform_.explained_variance
        self.all_eigenvalues_ = all_ev
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        X = check_array(X)
        return self.transform_.transform(X)


# -- two-class extraction and splitting ----------------------------------------


def select_pair(ds, a, b):
    """Keep rows of classes ``a`` and ``b``; ``a`` becomes +1, ``b`` becomes -1."""
    a, b = int(a), int(b)
    if a == b:
        raise ValueError("select_pair needs two different class ids")
    present = set(int(c) for c in np.unique(ds.labels))
    for c in (a, b):
        if c not in present:
            raise ClassLookupError(f"class id {c} does not occur in the dataset "
                                   f"(available: {sorted(present)})")
    mask = (ds.labels == a) | (ds.labels == b)
    y = np.where(ds.labels[mask] == a, 1.0, -1.0)
    return BinaryDataset(ds.features[mask], y, (a, b))


def split_indices(labels, test_fraction=0.2, seed=0):
    """Stratified, seeded train/test index split.

    Each label contributes ``round(test_fraction * count)`` test points,
    clamped to ``[1, count - 1]`` when the label has at least two points.
    Both index arrays are returned sorted.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 2:
        raise InsufficientDataError(f"split needs at least 2 samples, got {n}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    classes = np.unique(labels)
    for c in classes:
        idx = np.flatnonzero(labels == c)
        k = int(math.floor(test_fraction * idx.size + 0.5))
        if idx.size >= 2:
            k = min(max(k, 1), idx.size - 1)
        else:
            k = 0
        test.extend(rng.permutation(idx)[:k].tolist())
    if not test:
        # every class is a singleton: move one point so both sides are non-empty
        test.append(int(rng.integers(n)))
    test = np.sort(np.array(test, dtype=np.int64))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def split(ds, test_fraction=0.2, seed=0):
    """Stratified deterministic split of a :class:`BinaryDataset` into (train, test)."""
    train, test = split_indices(ds.labels, test_fraction, seed)
    return ds.subset(train), ds.subset(test)
