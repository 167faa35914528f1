"""Seeded Gaussian-blob datasets standing in for the hyperspectral data."""

import numpy as np

from .dataset import RawDataset


def make_blobs(n_classes=4, n_per_class=50, n_features=6, separation=4.0, noise=1.0, seed=0):
    """Isotropic Gaussian classes with ids ``1..n_classes``.

    Class centres are consecutive points on a random walk with step length
    ``separation``, so neighbouring ids (the pairs usually compared) are
    ``separation`` apart on average while distant ids are further away.
    Rows are grouped by class.
    """
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_classes, n_features))
    for c in range(1, n_classes):
        step = rng.normal(size=n_features)
        centers[c] = centers[c - 1] + separation * step / np.linalg.norm(step)
    X = np.vstack([centers[c] + noise * rng.normal(size=(n_per_class, n_features))
                   for c in range(n_classes)])
    y = np.repeat(np.arange(1, n_classes + 1), n_per_class)
    return RawDataset(X, y, {c: f"blob-{c}" for c in range(1, n_classes + 1)})
