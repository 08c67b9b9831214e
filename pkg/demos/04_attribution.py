"""Feature attribution by summing path products through the flow graph.

A feature matters for a class exactly as much as information can travel from
it to that class output along some chain of units. On a layered graph the
sum over all paths collapses to a chain of matrix products. As a sanity
check, the result is compared (via a two-sample Kolmogorov-Smirnov test)
against the estimator-only baseline: direct MI between each feature and each
class label.
"""

import numpy as np

from nifflow import (
    EstimatorConfig,
    attribution_matrix,
    build_nif_graph,
    forward,
    ks_two_sample,
    raw_mi_attribution,
)

from _common import cluster_classifier

model, data = cluster_classifier()
graph = build_nif_graph(model, forward(model, data), EstimatorConfig())

attr = attribution_matrix(graph, feature_names=data.feature_names)
print("== path-product attribution (rows: features, cols: classes) ==")
for name, row in zip(data.feature_names, attr.values):
    print(f"  {name:>6}: " + "  ".join(f"{v:8.4f}" for v in row))
print("  (each cluster's coordinate feature dominates its own class column)")

raw = raw_mi_attribution(data, EstimatorConfig())
print("\n== estimator-only baseline: direct MI(feature; class indicator) ==")
for name, row in zip(data.feature_names, raw.values):
    print(f"  {name:>6}: " + "  ".join(f"{v:8.4f}" for v in row))

d, p = ks_two_sample(attr.values.ravel(), raw.values.ravel())
print(f"\ntwo-sample K-S between the two attribution distributions: D={d:.3f}, p={p:.3f}")

top_path = np.unravel_index(np.argmax(attr.values), attr.values.shape)
print(f"strongest attribution: feature {data.feature_names[top_path[0]]!r} "
      f"-> class {top_path[1]}")
