"""Shared bits for the demo scripts: a hand-built classifier that needs no
training, plus fixture discovery."""

from pathlib import Path

import numpy as np

from nifflow import Dataset, Layer, ModelGraph

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "out"

CENTROIDS = np.array(
    [
        [4.0, 0.5, 0.5, 0.5],
        [0.5, 4.0, 0.5, 0.5],
        [0.5, 0.5, 4.0, 0.5],
    ]
)


def cluster_classifier(n_per_class=60, seed=0):
    """Three Gaussian clusters and a nearest-centroid classifier written
    directly as dense layers; four of the eight hidden units are dead ReLUs."""
    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for c in range(3):
        blocks.append(np.maximum(CENTROIDS[c] + 0.4 * rng.normal(size=(n_per_class, 4)), 0.0))
        labels += [c] * n_per_class
    features = np.vstack(blocks)
    labels = np.asarray(labels)
    order = rng.permutation(labels.size)

    w1 = np.zeros((8, 4))
    w1[:4, :4] = np.eye(4)
    b1 = np.zeros(8)
    b1[4:] = -1.0
    w2 = np.zeros((3, 8))
    w2[:, :4] = 2.0 * CENTROIDS
    b2 = -np.sum(CENTROIDS**2, axis=1)
    model = ModelGraph(
        layers=[Layer("dense", "relu", w1, b1), Layer("dense", "softmax", w2, b2)],
        input_shape=(4,),
        class_count=3,
    )
    names = ["north", "east", "south", "noise"]
    return model, Dataset(features=features[order], labels=labels[order], feature_names=names)


def fixture_bundle(name):
    bundle = FIXTURES / name
    return bundle if (bundle / "model.json").exists() else None
