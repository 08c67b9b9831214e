"""Data sources for the reference bundles.

Iris and the 8x8 digit images come from scikit-learn's bundled copies. The
banknote-authentication table is not shipped with any local library and this
environment has no data network, so a synthetic surrogate with the same
schema, size, and class balance (4 wavelet statistics, 1372 rows, 762/610)
stands in for it; the generator draws a seeded Gaussian mixture calibrated to
the real data's near-separable regime. Bundle metadata records the
provenance.
"""

from __future__ import annotations

import numpy as np
from sklearn.datasets import load_digits, load_iris

IRIS_FEATURE_NAMES = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
BANKNOTE_FEATURE_NAMES = ["variance", "skewness", "curtosis", "entropy"]


def iris_dataset():
    data = load_iris()
    return (
        np.asarray(data.data, dtype=np.float64),
        np.asarray(data.target, dtype=np.int64),
        IRIS_FEATURE_NAMES,
        "UCI Iris via scikit-learn bundled copy",
    )


def banknote_dataset(seed=20240817):
    rng = np.random.default_rng(seed)
    genuine_mean = np.array([2.3, 4.5, 0.8, -1.1])
    forged_mean = np.array([-1.9, -1.0, 2.2, -1.3])
    genuine_cov = np.diag([2.0, 3.4, 1.6, 1.2])
    forged_cov = np.diag([1.9, 3.0, 2.6, 1.4])
    genuine = rng.multivariate_normal(genuine_mean, genuine_cov, size=762)
    forged = rng.multivariate_normal(forged_mean, forged_cov, size=610)
    features = np.vstack([genuine, forged])
    labels = np.concatenate([np.zeros(762, dtype=np.int64), np.ones(610, dtype=np.int64)])
    order = rng.permutation(labels.size)
    return (
        features[order],
        labels[order],
        BANKNOTE_FEATURE_NAMES,
        "synthetic surrogate for UCI banknote authentication "
        "(seeded Gaussian mixture, same schema/size/class balance)",
    )


def digits_dataset():
    data = load_digits()
    # row-major 8x8 grayscale, rescaled from 0..16 to 0..1
    features = np.asarray(data.data, dtype=np.float64) / 16.0
    labels = np.asarray(data.target, dtype=np.int64)
    names = [f"p{i}" for i in range(64)]
    return features, labels, names, "scikit-learn 8x8 handwritten digits, intensities scaled to [0, 1]"
