"""Command-line pipeline: build flow graphs, analyze, attribute, render
saliency, run pruning sweeps, and self-check the estimators.

Option precedence is flags over an optional JSON config file over defaults
(k=5, beta=5e-4, gamma=1, seed=0). Logs go to stderr; an artifact goes to
stdout when ``-`` is given as the output path. Failures print one
machine-readable JSON line to stderr and exit nonzero. Identical invocations
with identical inputs and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import (
    attribution_csv,
    attribution_matrix,
    ks_two_sample,
    raw_mi_attribution,
    saliency_csv,
    saliency_map,
)
from .estimators import EstimationError, EstimatorConfig, estimate_mi, ksg_mi
from .model_io import (
    DatasetFormatError,
    ModelFormatError,
    forward,
    load_dataset,
    load_model,
)
from .network_science import betweenness, detect_communities
from .nif_graph import build_nif_graph, export_graph
from .pruning import default_steps, prune_report_csv, prune_sweep

log = logging.getLogger("nifflow")

_DEFAULTS = {
    "estimator": "ksg",
    "k": 5,
    "bins": 16,
    "beta": 5e-4,
    "relevance": "per_feature",
    "mode": "mi",
    "sample": None,
    "gamma": 1.0,
    "edge_length": "inverse",
    "format": "json",
    "seed": 0,
    "threads": None,
    "steps": None,
    "class_index": None,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nifflow",
        description="Information-flow graphs and analytics for small classifiers.",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"nifflow {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, model=True, data=True, out=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        if data:
            p.add_argument("--data", required=True, help="dataset CSV file")
        p.add_argument("--config", help="optional JSON config file (flags win)")
        p.add_argument("--estimator", choices=("ksg", "hist"))
        p.add_argument("--k", type=int, help="neighbor count for the k-NN estimator")
        p.add_argument("--bins", type=int, help="bins per axis for the histogram estimator")
        p.add_argument("--beta", type=float, help="redundancy coefficient")
        p.add_argument("--relevance", choices=("literal", "per_feature"))
        p.add_argument("--seed", type=int, help="seed for tie-jitter and community detection")
        p.add_argument("--threads", type=int, help="parallelism cap (env NIFFLOW_THREADS)")
        if out:
            p.add_argument("--out", required=True, help="output path, or - for stdout")

    p = sub.add_parser("build", help="build the flow graph and export it", allow_abbrev=False)
    common(p)
    p.add_argument("--mode", choices=("mi", "pmi"))
    p.add_argument("--sample", type=int, help="sample index for pmi mode")
    p.add_argument("--format", choices=("dot", "graphml", "json"))

    p = sub.add_parser(
        "analyze", help="build, then attach centrality and communities", allow_abbrev=False
    )
    common(p)
    p.add_argument("--mode", choices=("mi", "pmi"))
    p.add_argument("--sample", type=int)
    p.add_argument("--format", choices=("dot", "graphml", "json"))
    p.add_argument("--gamma", type=float, help="community resolution (> 0)")
    p.add_argument("--edge-length", dest="edge_length", choices=("inverse", "unit"))

    p = sub.add_parser(
        "attribute",
        help="flow attribution matrix plus K-S comparison vs raw MI",
        allow_abbrev=False,
    )
    common(p)
    p.add_argument("--mode", choices=("mi", "pmi"), help="must stay mi; pmi is rejected")

    p = sub.add_parser(
        "saliency", help="per-sample pixel saliency map for a conv model", allow_abbrev=False
    )
    common(p)
    p.add_argument("--sample", type=int, required=True, help="sample index")
    p.add_argument(
        "--class",
        dest="class_index",
        type=int,
        help="target class (default: the model's prediction for the sample)",
    )

    p = sub.add_parser("prune", help="importance-ordered weight-zeroing sweep", allow_abbrev=False)
    common(p)
    p.add_argument("--eval-data", dest="eval_data", help="held-out CSV for accuracy (default: --data)")
    p.add_argument("--steps", help="comma list of counts or fractions, e.g. 0,8,16 or 0,0.25,0.5,1")

    p = sub.add_parser(
        "validate", help="estimator self-checks against analytic values", allow_abbrev=False
    )
    common(p, model=False, data=False, out=False)
    return parser


def _resolve_options(args) -> dict:
    file_conf = {}
    if getattr(args, "config", None):
        file_conf = json.loads(Path(args.config).read_text(encoding="utf-8"))

    options = {}
    for key, default in _DEFAULTS.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            options[key] = flag_value
        elif key in file_conf:
            options[key] = file_conf[key]
        else:
            options[key] = default
    if options["threads"] is None:
        options["threads"] = int(os.environ.get("NIFFLOW_THREADS", "1"))
    return options


def _estimator_config(options) -> EstimatorConfig:
    kind = {"ksg": "ksg", "hist": "histogram"}[options["estimator"]]
    config = EstimatorConfig(
        kind=kind,
        k=options["k"],
        bins=options["bins"],
        beta=options["beta"],
        relevance_mode=options["relevance"],
        rng_seed=options["seed"],
    )
    config.validate()
    return config


def _provenance(args, options) -> dict:
    doc = {"tool": "nifflow", "version": __version__, "subcommand": args.subcommand}
    for key in sorted(options):
        value = options[key]
        if key in ("steps", "class_index") and args.subcommand not in ("prune", "saliency"):
            continue
        doc[key] = value
    for key in ("model", "data", "eval_data"):
        if getattr(args, key, None):
            doc[key] = getattr(args, key)
    return doc


def _write_artifact(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
        log.info("wrote %s", out)


def _build_graph(args, options):
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    record = forward(model, dataset)
    config = _estimator_config(options)
    mode = {"mi": "mean_mi", "pmi": "pmi"}[options["mode"]]
    sample = options["sample"] if mode == "pmi" else None
    graph = build_nif_graph(
        model, record, config, mode=mode, sample_index=sample, threads=options["threads"]
    )
    return model, dataset, graph


def _cmd_build(args, options) -> int:
    _, _, graph = _build_graph(args, options)
    _write_artifact(export_graph(graph, options["format"], _provenance(args, options)), args.out)
    return 0


def _cmd_analyze(args, options) -> int:
    _, _, graph = _build_graph(args, options)
    mode = {"inverse": "inverse_weight", "unit": "unit"}[options["edge_length"]]
    weighted = graph.to_weighted_graph()
    graph.set_node_attribute("centrality", betweenness(weighted, edge_length_mode=mode))
    result = detect_communities(weighted, gamma=options["gamma"], seed=options["seed"])
    graph.set_node_attribute("community", result.assignment)
    log.info(
        "communities: %d at gamma=%s (Q=%.6f)",
        result.community_count,
        options["gamma"],
        result.modularity,
    )
    _write_artifact(export_graph(graph, options["format"], _provenance(args, options)), args.out)
    return 0


def _cmd_attribute(args, options) -> int:
    if options["mode"] == "pmi":
        raise ValueError("attribute works on the mean-MI graph; drop --mode pmi")
    model, dataset, graph = _build_graph(args, options)
    config = _estimator_config(options)
    nif_attr = attribution_matrix(graph, feature_names=dataset.feature_names)
    raw_attr = raw_mi_attribution(
        dataset, config, class_count=model.class_count, threads=options["threads"]
    )
    d_stat, p_value = ks_two_sample(nif_attr.values.ravel(), raw_attr.values.ravel())
    provenance = _provenance(args, options)
    report = {
        "run_config": provenance,
        "ks_two_sample": {"statistic": d_stat, "p_value": p_value},
        "nif_attribution": nif_attr.values.tolist(),
        "raw_mi_attribution": raw_attr.values.tolist(),
        "feature_names": dataset.feature_names,
    }
    report_text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if args.out == "-":
        sys.stdout.write(report_text)
    else:
        _write_artifact(attribution_csv(nif_attr, provenance), args.out)
        report_path = str(Path(args.out).with_suffix("")) + ".report.json"
        _write_artifact(report_text, report_path)
    log.info("K-S statistic %.6f, p-value %.6f", d_stat, p_value)
    return 0


def _cmd_saliency(args, options) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    config = _estimator_config(options)
    sample = options["sample"]
    class_index = options["class_index"]
    if class_index is None:
        record = forward(model, dataset)
        class_index = int(np.argmax(record.logits[sample]))
        log.info("using predicted class %d for sample %d", class_index, sample)
    smap = saliency_map(model, dataset, sample, class_index, config, threads=options["threads"])
    options = dict(options, class_index=class_index)
    _write_artifact(saliency_csv(smap, _provenance(args, options)), args.out)
    return 0


def _parse_steps(text: str) -> list:
    steps = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            steps.append(int(token))
        except ValueError:
            steps.append(float(token))
    if not steps:
        raise ValueError("empty --steps list")
    return steps


def _cmd_prune(args, options) -> int:
    model, dataset, graph = _build_graph(args, options)
    if args.eval_data:
        eval_dataset = load_dataset(args.eval_data)
    else:
        eval_dataset = dataset
        log.warning("evaluating on the estimation data; pass --eval-data for a held-out split")
    steps = _parse_steps(options["steps"]) if options["steps"] else default_steps()
    report = prune_sweep(model, eval_dataset, graph, steps)
    _write_artifact(prune_report_csv(report, _provenance(args, options)), args.out)
    return 0


def _cmd_validate(args, options) -> int:
    config = EstimatorConfig(rng_seed=options["seed"])
    checks = []

    for rho in (0.0, 0.3, 0.6, 0.9):
        truth = -0.5 * np.log(1.0 - rho * rho)
        values = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            xy = rng.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]], size=2000)
            values.append(ksg_mi(xy[:, 0], xy[:, 1], config).value)
        error = abs(float(np.mean(values)) - truth)
        checks.append((f"ksg_gaussian_rho_{rho}", error <= 0.1, f"|err|={error:.4f}"))

    rng = np.random.default_rng(options["seed"])
    coin = rng.integers(0, 2, 5000).astype(float)
    est = ksg_mi(coin, coin, config)
    checks.append(
        ("ksg_binary_identity", abs(est.value - np.log(2)) <= 0.03, f"value={est.value:.4f}")
    )

    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=200)
        y = np.maximum(x + rng.normal(size=200), 0.0)
        for kind in ("ksg", "histogram"):
            est = estimate_mi(x, y, EstimatorConfig(kind=kind, rng_seed=options["seed"]))
            worst = max(worst, abs(est.value - float(est.per_sample.mean())))
    checks.append(("pmi_mean_identity", worst <= 1e-9, f"worst={worst:.2e}"))

    four = np.repeat([0.0, 1.0, 2.0, 3.0], 250)
    est = estimate_mi(four, four, EstimatorConfig(kind="histogram"))
    checks.append(
        ("histogram_exact_ln4", abs(est.value - np.log(4)) <= 0.02, f"value={est.value:.4f}")
    )

    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
        failed += 0 if ok else 1
    return 1 if failed else 0


_COMMANDS = {
    "build": _cmd_build,
    "analyze": _cmd_analyze,
    "attribute": _cmd_attribute,
    "saliency": _cmd_saliency,
    "prune": _cmd_prune,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="nifflow: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        options = _resolve_options(args)
        return _COMMANDS[args.subcommand](args, options)
    except (
        ModelFormatError,
        DatasetFormatError,
        EstimationError,
        ValueError,
        IndexError,
        OSError,
    ) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
