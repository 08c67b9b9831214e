"""Shared builders: synthetic models/datasets and fixture-bundle discovery."""

from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from nifflow import Dataset, Layer, ModelGraph

FIXTURES_DIR = Path(
    os.environ.get("NIFFLOW_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures" / "out")
)


def fixture_bundle(name: str) -> Path | None:
    bundle = FIXTURES_DIR / name
    return bundle if (bundle / "model.json").exists() else None


def require_bundle(name: str) -> Path:
    bundle = fixture_bundle(name)
    if bundle is None:
        pytest.skip(f"fixture bundle {name!r} not generated (run `make fixtures`)")
    return bundle


def make_dense_model(rng, sizes, final_activation="softmax"):
    """Random dense stack with ReLU hidden layers."""
    layers = []
    for i in range(len(sizes) - 1):
        last = i == len(sizes) - 2
        layers.append(
            Layer(
                kind="dense",
                activation=final_activation if last else "relu",
                weights=rng.normal(size=(sizes[i + 1], sizes[i])),
                bias=rng.normal(size=sizes[i + 1]) * 0.1,
            )
        )
    return ModelGraph(layers=layers, input_shape=(sizes[0],), class_count=sizes[-1])


def cluster_model_and_data(n_per_class=60, seed=0):
    """A hand-built near-perfect 3-class classifier over Gaussian clusters.

    Layer 1 passes the four features through identity rows and carries four
    dead ReLU units (zero weights, negative bias); layer 2 scores classes by
    nearest centroid. Gives a known-good model without any training.
    """
    rng = np.random.default_rng(seed)
    centroids = np.array(
        [
            [4.0, 0.5, 0.5, 0.5],
            [0.5, 4.0, 0.5, 0.5],
            [0.5, 0.5, 4.0, 0.5],
        ]
    )
    blocks, labels = [], []
    for c in range(3):
        points = centroids[c] + 0.4 * rng.normal(size=(n_per_class, 4))
        blocks.append(np.maximum(points, 0.0))
        labels += [c] * n_per_class
    features = np.vstack(blocks)
    labels = np.asarray(labels)
    order = rng.permutation(labels.size)

    hidden = 8
    w1 = np.zeros((hidden, 4))
    w1[:4, :4] = np.eye(4)
    b1 = np.zeros(hidden)
    b1[4:] = -1.0  # dead ReLU units: constant zero activation
    w2 = np.zeros((3, hidden))
    w2[:, :4] = 2.0 * centroids
    b2 = -np.sum(centroids**2, axis=1)
    model = ModelGraph(
        layers=[
            Layer("dense", "relu", w1, b1),
            Layer("dense", "softmax", w2, b2),
        ],
        input_shape=(4,),
        class_count=3,
    )
    dataset = Dataset(features=features[order], labels=labels[order])
    return model, dataset


def tiny_conv_model(seed=0, channels=2, classes=2, side=4):
    """Conv (valid, stride 1) -> flatten -> dense head on a side x side image."""
    rng = np.random.default_rng(seed)
    out_side = side - 1
    layers = [
        Layer("conv2d", "relu", rng.normal(size=(channels, 1, 2, 2)), np.zeros(channels)),
        Layer("flatten"),
        Layer(
            "dense",
            "softmax",
            rng.normal(size=(classes, channels * out_side * out_side)),
            np.zeros(classes),
        ),
    ]
    return ModelGraph(layers=layers, input_shape=(side, side, 1), class_count=classes)


def image_dataset(rng, n=80, side=4, constant_pixels=()):
    """Random nonnegative images with labels tied to total brightness."""
    feats = np.abs(rng.normal(size=(n, side * side)))
    for p in constant_pixels:
        feats[:, p] = 0.7
    labels = (feats.sum(axis=1) > np.median(feats.sum(axis=1))).astype(int)
    return Dataset(features=feats, labels=labels, image_shape=(side, side, 1))
