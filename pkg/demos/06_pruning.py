"""Pruning guided by information flow instead of weight magnitude.

Edges are ranked by how little information they carry; weights are zeroed in
that order (a neuron's bias goes once all its inputs are gone) and accuracy
is re-measured at each step. The curve stays flat while zero-flow wiring is
removed, then falls to the chance floor once real pathways start dying.

Uses the trained iris bundle when fixtures exist, else the synthetic model.
"""

import numpy as np

from nifflow import (
    EstimatorConfig,
    build_nif_graph,
    default_steps,
    forward,
    load_dataset,
    load_model,
    prune_sweep,
)

from _common import cluster_classifier, fixture_bundle

bundle = fixture_bundle("iris")
if bundle is None:
    print("fixtures not generated; using the synthetic cluster model\n")
    model, estimation = cluster_classifier()
    evaluation = estimation
else:
    model = load_model(bundle / "model.json")
    estimation = load_dataset(bundle / "train.csv")
    evaluation = load_dataset(bundle / "eval.csv")

graph = build_nif_graph(model, forward(model, estimation), EstimatorConfig())
report = prune_sweep(model, evaluation, graph, steps=default_steps(11))

total = report.entries[-1][0]
print(f"{total} prunable weights; accuracy as low-flow edges are zeroed:\n")
print("  zeroed  share   accuracy")
for count, accuracy in report.entries:
    bar = "#" * round(40 * accuracy)
    print(f"  {count:6d}  {count / total:6.0%}   {accuracy:.3f} {bar}")

chance = np.bincount(evaluation.labels).max() / evaluation.labels.size
print(f"\nchance level on this split: {chance:.3f}")
