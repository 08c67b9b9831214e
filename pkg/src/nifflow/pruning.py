"""Progressively zero dense-model weights in order of rising edge importance
and track accuracy on an evaluation split.

Edges are ranked once, ascending by raw clamped flow weight (ties broken by
layer, source, destination). The edge from unit i of layer l to unit j of
layer l+1 maps to weight entry [j, i] of dense layer l. A neuron's bias is
zeroed as soon as all of its incoming weights are zero, mirroring the
dead-neuron rule. The model under test is copied; the original is never
touched. Conv models are out: channel-level flow does not map one-to-one
onto kernel entries.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .model_io import Dataset, Layer, ModelGraph, model_fingerprint, predict_accuracy
from .nif_graph import NifGraph

__all__ = ["PruneReport", "prune_sweep", "prune_report_csv", "default_steps"]

log = logging.getLogger(__name__)


@dataclass
class PruneReport:
    """(zeroed weight count, accuracy) pairs, first entry the unpruned baseline."""

    entries: list[tuple[int, float]]
    model_fingerprint: str
    mode: str


def default_steps(points: int = 21) -> list[float]:
    """Even fraction grid from the unpruned model to fully zeroed weights."""
    return [i / (points - 1) for i in range(points)]


def _resolve_counts(steps, total: int) -> list[int]:
    counts = {0}
    for step in steps:
        if isinstance(step, (bool, np.bool_)):
            raise ValueError(f"step {step!r} is not a count or fraction")
        if isinstance(step, (int, np.integer)):
            count = int(step)
        else:
            fraction = float(step)
            if not 0.0 <= fraction <= 1.0:
                raise ValueError(f"fraction step {fraction} outside [0, 1]")
            count = round(fraction * total)
        if count < 0 or count > total:
            raise ValueError(f"step {step!r} resolves to {count} of {total} prunable weights")
        counts.add(count)
    return sorted(counts)


def prune_sweep(model: ModelGraph, eval_dataset: Dataset, graph: NifGraph, steps) -> PruneReport:
    """Zero edges in rising-importance order and record accuracy at each step.

    ``steps`` mixes integer zeroed-weight counts and float fractions of the
    total weight count. The evaluation split should be disjoint from the data
    the graph was estimated on; that is recommended, not enforced.
    """
    if any(layer.kind != "dense" for layer in model.layers):
        raise ValueError("pruning supports dense-only models")
    if graph.model_fingerprint != model_fingerprint(model):
        raise ValueError("graph was built from a different model than the one being pruned")

    total = sum(layer.weights.size for layer in model.layers)
    counts = _resolve_counts(steps, total)

    ranked = sorted(
        graph.edges, key=lambda e: (max(e.weight_raw, 0.0), e.src[0], e.src[1], e.dst[1])
    )

    entries = [(0, predict_accuracy(model, eval_dataset))]
    pruned = ModelGraph(
        layers=[
            Layer(
                kind=l.kind,
                activation=l.activation,
                weights=l.weights.copy(),
                bias=l.bias.copy(),
                stride=l.stride,
            )
            for l in model.layers
        ],
        input_shape=model.input_shape,
        class_count=model.class_count,
    )

    done = 0
    for count in counts:
        if count == 0:
            continue
        for edge in ranked[done:count]:
            layer_index = edge.src[0]
            pruned.layers[layer_index].weights[edge.dst[1], edge.src[1]] = 0.0
        done = count
        for layer in pruned.layers:
            dead_rows = ~layer.weights.any(axis=1)
            layer.bias[dead_rows] = 0.0
        entries.append((count, predict_accuracy(pruned, eval_dataset)))

    return PruneReport(entries=entries, model_fingerprint=graph.model_fingerprint, mode=graph.mode)


def prune_report_csv(report: PruneReport, run_config: dict | None = None) -> str:
    lines = []
    if run_config is not None:
        lines.append("# config: " + json.dumps(run_config, sort_keys=True))
    lines.append(
        "# provenance: "
        + json.dumps(
            {"model_fingerprint": report.model_fingerprint, "mode": report.mode},
            sort_keys=True,
        )
    )
    lines.append("zeroed_weights,accuracy")
    for count, accuracy in report.entries:
        lines.append(f"{count},{accuracy!r}")
    return "\n".join(lines) + "\n"
