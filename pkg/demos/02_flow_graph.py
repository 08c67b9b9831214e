"""From a trained model to an information-flow graph.

Every unit becomes a node; every pair of units in consecutive layers gets an
edge weighted by how much information actually flows between them on the
data, not by the wire weight the optimizer happened to leave. Dead ReLU
units show up immediately: all their edges carry exactly zero.
"""

from pathlib import Path

from nifflow import EstimatorConfig, build_nif_graph, export_graph, forward

from _common import cluster_classifier

model, data = cluster_classifier()
record = forward(model, data)
graph = build_nif_graph(model, record, EstimatorConfig(), mode="mean_mi")

print(f"layers: {graph.layer_sizes}, nodes: {len(graph.nodes)}, edges: {graph.edge_count}")

print("\n== strongest flows per layer (normalized weight 1.0 = layer max) ==")
for layer in range(len(graph.layer_sizes) - 1):
    edges = [e for e in graph.edges if e.src[0] == layer]
    top = max(edges, key=lambda e: e.weight_norm)
    print(f"  layer {layer}->{layer + 1}: {top.src} -> {top.dst}  raw={top.weight_raw:.4f} nats")

flows = {}
for e in graph.edges:
    for layer, unit in (e.src, e.dst):
        if layer == 1:
            flows.setdefault(unit, []).append(e.weight_norm)
dead = sorted(unit for unit, weights in flows.items() if all(w == 0.0 for w in weights))
print(f"\nhidden units with zero flow on every edge (dead ReLUs): {dead}")

out = Path(__file__).with_suffix("") .parent / "out"
out.mkdir(exist_ok=True)
(out / "flow_graph.dot").write_text(export_graph(graph, "dot"))
(out / "flow_graph.json").write_text(export_graph(graph, "json"))
print(f"\nwrote {out / 'flow_graph.dot'} (render with: dot -Tsvg) and flow_graph.json")
