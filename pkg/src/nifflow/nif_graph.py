"""Assemble the layered information-flow graph and serialize it.

Nodes are the model's units (input features or pixels, hidden neurons, conv
channel averages, class outputs); every pair of units in consecutive layers
gets an edge. Edge weights are either the mean-MI flow measure (relevance
minus beta-weighted redundancy against same-layer siblings) or, in pmi mode,
the pointwise MI of one chosen sample.

Raw weights keep their sign; normalized weights clamp negatives to zero first
and then divide by the per-layer maximum so the strongest edge of each layer
renders at full strength. Analytics on the graph (centrality, communities,
shortest paths) operate on the normalized weights; path-product attribution
uses raw clamped weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ._parallel import parallel_map
from .estimators import EstimatorConfig, EstimationError, estimate_mi
from .model_io import ActivationRecord, ModelGraph, model_fingerprint

__all__ = [
    "NifNode",
    "NifEdge",
    "NifGraph",
    "build_nif_graph",
    "pmi_edge_tensors",
    "export_graph",
    "graph_to_json",
    "graph_from_json",
    "graph_to_dot",
    "graph_to_graphml",
]

NODE_KINDS = ("input_feature", "hidden_neuron", "channel", "class_output")
GRAPH_MODES = ("mean_mi", "pmi")


@dataclass(frozen=True)
class NifNode:
    layer: int
    unit: int
    kind: str


@dataclass(frozen=True)
class NifEdge:
    src: tuple[int, int]
    dst: tuple[int, int]
    weight_raw: float
    weight_norm: float


@dataclass
class NifGraph:
    """Strictly layered DAG of information flow between consecutive layers."""

    layer_sizes: tuple[int, ...]
    nodes: tuple[NifNode, ...]
    edges: tuple[NifEdge, ...]
    mode: str
    sample_index: int | None
    estimator_config: EstimatorConfig
    model_fingerprint: str
    node_attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = self.layer_sizes
        for e in self.edges:
            if e.dst[0] != e.src[0] + 1:
                raise ValueError(f"edge {e.src}->{e.dst} does not join consecutive layers")
            if not (0 <= e.src[1] < sizes[e.src[0]] and 0 <= e.dst[1] < sizes[e.dst[0]]):
                raise ValueError(f"edge {e.src}->{e.dst} references a missing unit")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def weight_matrices(self, clamp: bool = True) -> list[np.ndarray]:
        """Per-layer edge-weight matrices (units_l x units_l+1) from raw weights."""
        mats = [
            np.zeros((self.layer_sizes[l], self.layer_sizes[l + 1]))
            for l in range(len(self.layer_sizes) - 1)
        ]
        for e in self.edges:
            w = e.weight_raw
            if clamp and w < 0.0:
                w = 0.0
            mats[e.src[0]][e.src[1], e.dst[1]] = w
        return mats

    def to_weighted_graph(self):
        """Directed weighted view over normalized weights, for graph analytics."""
        from .network_science import WeightedGraph

        nodes = [(n.layer, n.unit) for n in self.nodes]
        edges = [(e.src, e.dst, e.weight_norm) for e in self.edges]
        return WeightedGraph(nodes=nodes, edges=edges, directed=True)

    def set_node_attribute(self, name: str, values: dict) -> None:
        """Attach a per-node attribute (e.g. centrality, community) for export."""
        keyed = {(n.layer, n.unit): values[(n.layer, n.unit)] for n in self.nodes}
        self.node_attributes[name] = keyed


def _constant_units(mat: np.ndarray) -> np.ndarray:
    return np.all(mat == mat[0], axis=0)


def _node_kinds_for(unit_layers) -> list[str]:
    kinds = []
    last = len(unit_layers) - 1
    for i, la in enumerate(unit_layers):
        if i == 0:
            kinds.append("input_feature")
        elif i == last:
            kinds.append("class_output")
        elif la.kind == "conv2d":
            kinds.append("channel")
        else:
            kinds.append("hidden_neuron")
    return kinds


def _layer_estimates(src: np.ndarray, dst: np.ndarray, config, threads, per_sample: bool):
    """MI estimates for every (src unit, dst unit) pair of one layer boundary.

    Returns an array of shape (src_units, dst_units) of values, or
    (N, src_units, dst_units) of pointwise terms when ``per_sample`` is set.
    """
    n, su = src.shape
    du = dst.shape[1]

    def job(pair):
        i, u = pair
        try:
            est = estimate_mi(src[:, i], dst[:, u], config)
        except ValueError as exc:
            raise EstimationError(f"edge {i}->{u}: {exc}") from exc
        return est.per_sample if per_sample else est.value

    results = parallel_map(job, [(i, u) for i in range(su) for u in range(du)], threads)
    if per_sample:
        out = np.empty((n, su, du))
        for (i, u), vec in zip(((i, u) for i in range(su) for u in range(du)), results):
            out[:, i, u] = vec
    else:
        out = np.asarray(results, dtype=np.float64).reshape(su, du)
    return out


def _redundancy_sums(mat: np.ndarray, config, threads) -> np.ndarray:
    """Per-unit sum of pairwise MI against same-layer siblings.

    ``per_feature`` mode sums over all siblings; ``literal`` mode over
    preceding units only. Pairwise values are computed once per unordered
    pair (the estimator is exactly symmetric).
    """
    width = mat.shape[1]
    pairs = [(i, j) for i in range(width) for j in range(i + 1, width)]

    def job(pair):
        i, j = pair
        try:
            return estimate_mi(mat[:, i], mat[:, j], config).value
        except ValueError as exc:
            raise EstimationError(f"sibling pair {i},{j}: {exc}") from exc

    values = parallel_map(job, pairs, threads)
    sums = np.zeros(width)
    for (i, j), v in zip(pairs, values):
        if config.relevance_mode == "literal":
            sums[max(i, j)] += v
        else:
            sums[i] += v
            sums[j] += v
    return sums


def build_nif_graph(
    model: ModelGraph,
    activations: ActivationRecord,
    config: EstimatorConfig = EstimatorConfig(),
    mode: str = "mean_mi",
    sample_index: int | None = None,
    threads: int = 1,
) -> NifGraph:
    """Build the information-flow graph for a model from recorded activations.

    ``mean_mi`` weights edges with the relevance-minus-redundancy measure;
    ``pmi`` weights them with the pointwise MI of ``sample_index``. Estimator
    failures carry (layer, src, dst) context.
    """
    config.validate()
    if mode not in GRAPH_MODES:
        raise ValueError(f"unknown graph mode {mode!r}")
    units = activations.unit_layers()
    n = activations.sample_count
    if len(units) < 2:
        raise ValueError("need at least an input layer and one unit layer")
    if mode == "pmi":
        if sample_index is None or not 0 <= sample_index < n:
            raise ValueError(f"pmi mode needs a sample index in [0, {n}), got {sample_index}")
    elif sample_index is not None:
        raise ValueError("sample_index applies to pmi mode only")

    sizes = tuple(la.matrix.shape[1] for la in units)
    kinds = _node_kinds_for(units)
    nodes = tuple(
        NifNode(layer=l, unit=u, kind=kinds[l]) for l in range(len(sizes)) for u in range(sizes[l])
    )

    edges = []
    for l in range(len(units) - 1):
        src_mat = units[l].matrix
        dst_mat = units[l + 1].matrix
        try:
            if mode == "pmi":
                per = _layer_estimates(src_mat, dst_mat, config, threads, per_sample=True)
                raw = per[sample_index]
            else:
                if config.relevance_mode == "literal":
                    relevance = np.asarray(
                        parallel_map(
                            lambda u: estimate_mi(src_mat, dst_mat[:, u], config).value,
                            range(dst_mat.shape[1]),
                            threads,
                        )
                    )
                    raw = np.tile(relevance, (src_mat.shape[1], 1))
                else:
                    raw = _layer_estimates(src_mat, dst_mat, config, threads, per_sample=False)
                if config.beta != 0.0:
                    raw = raw - config.beta * _redundancy_sums(src_mat, config, threads)[:, None]
                # constant units exchange no information; the redundancy
                # discount must not manufacture flow around them
                raw[_constant_units(src_mat), :] = 0.0
                raw[:, _constant_units(dst_mat)] = 0.0
        except (EstimationError, ValueError) as exc:
            raise EstimationError(f"layer {l}: {exc}") from exc

        clamped = np.maximum(raw, 0.0)
        layer_max = clamped.max() if clamped.size else 0.0
        norm = clamped / layer_max if layer_max > 0.0 else np.zeros_like(clamped)
        for i in range(sizes[l]):
            for u in range(sizes[l + 1]):
                edges.append(
                    NifEdge(
                        src=(l, i),
                        dst=(l + 1, u),
                        weight_raw=float(raw[i, u]),
                        weight_norm=float(norm[i, u]),
                    )
                )

    return NifGraph(
        layer_sizes=sizes,
        nodes=nodes,
        edges=tuple(edges),
        mode=mode,
        sample_index=sample_index,
        estimator_config=config,
        model_fingerprint=model_fingerprint(model),
    )


def pmi_edge_tensors(
    activations: ActivationRecord, config: EstimatorConfig = EstimatorConfig(), threads: int = 1
) -> list[np.ndarray]:
    """Pointwise-MI link tensors for every layer boundary, all samples at once.

    Returns one (N, units_l, units_l+1) array per boundary; slicing out one
    sample gives exactly the edge matrices of that sample's pmi-mode graph.
    """
    config.validate()
    units = activations.unit_layers()
    return [
        _layer_estimates(units[l].matrix, units[l + 1].matrix, config, threads, per_sample=True)
        for l in range(len(units) - 1)
    ]


# ---------------------------------------------------------------------------
# serialization


def _node_id(layer: int, unit: int) -> str:
    return f"L{layer}U{unit}"


def _sorted_attr_names(graph: NifGraph) -> list[str]:
    return sorted(graph.node_attributes)


def graph_to_json(graph: NifGraph, run_config: dict | None = None) -> str:
    attr_names = _sorted_attr_names(graph)
    nodes = []
    for node in graph.nodes:
        doc = {"layer": node.layer, "unit": node.unit, "kind": node.kind}
        for name in attr_names:
            doc[name] = graph.node_attributes[name][(node.layer, node.unit)]
        nodes.append(doc)
    edges = [
        {
            "src": list(e.src),
            "dst": list(e.dst),
            "weight_raw": e.weight_raw,
            "weight_norm": e.weight_norm,
        }
        for e in graph.edges
    ]
    doc = {
        "schema": "nif-graph/v1",
        "mode": graph.mode,
        "sample_index": graph.sample_index,
        "estimator_config": asdict(graph.estimator_config),
        "model_fingerprint": graph.model_fingerprint,
        "layer_sizes": list(graph.layer_sizes),
        "nodes": nodes,
        "edges": edges,
    }
    if run_config is not None:
        doc["run_config"] = run_config
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def graph_from_json(text: str) -> NifGraph:
    """Rebuild a graph from its JSON export; exact round-trip of all fields."""
    doc = json.loads(text)
    if doc.get("schema") != "nif-graph/v1":
        raise ValueError(f"unsupported graph schema {doc.get('schema')!r}")
    nodes = []
    attributes: dict = {}
    for nd in doc["nodes"]:
        nodes.append(NifNode(layer=nd["layer"], unit=nd["unit"], kind=nd["kind"]))
        for key, value in nd.items():
            if key in ("layer", "unit", "kind"):
                continue
            attributes.setdefault(key, {})[(nd["layer"], nd["unit"])] = value
    edges = tuple(
        NifEdge(
            src=tuple(ed["src"]),
            dst=tuple(ed["dst"]),
            weight_raw=ed["weight_raw"],
            weight_norm=ed["weight_norm"],
        )
        for ed in doc["edges"]
    )
    return NifGraph(
        layer_sizes=tuple(doc["layer_sizes"]),
        nodes=tuple(nodes),
        edges=edges,
        mode=doc["mode"],
        sample_index=doc["sample_index"],
        estimator_config=EstimatorConfig(**doc["estimator_config"]),
        model_fingerprint=doc["model_fingerprint"],
        node_attributes=attributes,
    )


_COMMUNITY_PALETTE = (
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
    "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd", "#4878d0", "#ee854a",
)


def graph_to_dot(graph: NifGraph, run_config: dict | None = None) -> str:
    """Graphviz digraph: edge penwidth tracks flow, node width tracks
    centrality, fill color tracks community membership."""
    centrality = graph.node_attributes.get("centrality")
    community = graph.node_attributes.get("community")
    max_cent = max(centrality.values()) if centrality else 0.0

    lines = ["digraph nif {"]
    snapshot = {"estimator_config": asdict(graph.estimator_config), "mode": graph.mode}
    if run_config is not None:
        snapshot["run_config"] = run_config
    lines.append(f"  // config: {json.dumps(snapshot, sort_keys=True)}")
    lines.append("  rankdir=LR;")
    lines.append('  node [shape=circle, fixedsize=true, width=0.45, label=""];')
    for node in graph.nodes:
        attrs = [f'xlabel="{node.layer}:{node.unit}"']
        if centrality is not None:
            score = centrality[(node.layer, node.unit)]
            width = 0.3 + (0.9 * score / max_cent if max_cent > 0 else 0.0)
            attrs.append(f"width={width:.4f}")
        if community is not None:
            color = _COMMUNITY_PALETTE[int(community[(node.layer, node.unit)]) % len(_COMMUNITY_PALETTE)]
            attrs.append(f'style=filled, fillcolor="{color}"')
        lines.append(f'  "{_node_id(node.layer, node.unit)}" [{", ".join(attrs)}];')
    for e in graph.edges:
        pen = 0.2 + 4.8 * e.weight_norm
        lines.append(
            f'  "{_node_id(*e.src)}" -> "{_node_id(*e.dst)}" '
            f'[penwidth={pen:.4f}, weight_raw="{e.weight_raw!r}", weight_norm="{e.weight_norm!r}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_graphml(graph: NifGraph, run_config: dict | None = None) -> str:
    attr_names = _sorted_attr_names(graph)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        ' <key id="d_layer" for="node" attr.name="layer" attr.type="int"/>',
        ' <key id="d_unit" for="node" attr.name="unit" attr.type="int"/>',
        ' <key id="d_kind" for="node" attr.name="kind" attr.type="string"/>',
    ]
    for i, name in enumerate(attr_names):
        sample = next(iter(graph.node_attributes[name].values()))
        attr_type = "int" if isinstance(sample, (int, np.integer)) else "double"
        lines.append(
            f' <key id="d_attr{i}" for="node" attr.name={quoteattr(name)} attr.type="{attr_type}"/>'
        )
    lines += [
        ' <key id="e_raw" for="edge" attr.name="weight_raw" attr.type="double"/>',
        ' <key id="e_norm" for="edge" attr.name="weight_norm" attr.type="double"/>',
        ' <key id="g_config" for="graph" attr.name="config" attr.type="string"/>',
        ' <graph id="nif" edgedefault="directed">',
    ]
    snapshot = {
        "estimator_config": asdict(graph.estimator_config),
        "mode": graph.mode,
        "sample_index": graph.sample_index,
        "model_fingerprint": graph.model_fingerprint,
    }
    if run_config is not None:
        snapshot["run_config"] = run_config
    lines.append(f'  <data key="g_config">{escape(json.dumps(snapshot, sort_keys=True))}</data>')
    for node in graph.nodes:
        lines.append(f'  <node id="{_node_id(node.layer, node.unit)}">')
        lines.append(f'   <data key="d_layer">{node.layer}</data>')
        lines.append(f'   <data key="d_unit">{node.unit}</data>')
        lines.append(f'   <data key="d_kind">{node.kind}</data>')
        for i, name in enumerate(attr_names):
            value = graph.node_attributes[name][(node.layer, node.unit)]
            lines.append(f'   <data key="d_attr{i}">{value!r}</data>')
        lines.append("  </node>")
    for e in graph.edges:
        lines.append(f'  <edge source="{_node_id(*e.src)}" target="{_node_id(*e.dst)}">')
        lines.append(f'   <data key="e_raw">{e.weight_raw!r}</data>')
        lines.append(f'   <data key="e_norm">{e.weight_norm!r}</data>')
        lines.append("  </edge>")
    lines += [" </graph>", "</graphml>"]
    return "\n".join(lines) + "\n"


def export_graph(graph: NifGraph, format: str, run_config: dict | None = None) -> str:
    """Serialize to 'dot', 'graphml', or 'json'; byte-stable given equal inputs."""
    if format == "json":
        return graph_to_json(graph, run_config)
    if format == "dot":
        return graph_to_dot(graph, run_config)
    if format == "graphml":
        return graph_to_graphml(graph, run_config)
    raise ValueError(f"unknown export format {format!r}")
