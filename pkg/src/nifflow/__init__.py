"""nifflow: information-flow graphs for small feedforward/conv classifiers.

Turn a trained model plus a dataset into a layered graph whose edges carry
mutual-information flow weights, then analyze it: centrality, communities,
path-product feature attribution, per-sample saliency maps, and
importance-ordered pruning sweeps.
"""

__version__ = "0.1.0"

from .model_io import (
    ActivationRecord,
    Dataset,
    DatasetFormatError,
    Layer,
    LayerActivations,
    ModelFormatError,
    ModelGraph,
    forward,
    load_dataset,
    load_model,
    model_fingerprint,
    predict_accuracy,
    save_dataset,
    save_model,
)
from .estimators import (
    EstimationError,
    EstimatorConfig,
    MiEstimate,
    estimate_mi,
    histogram_mi,
    ksg_mi,
    nif_feature,
    pmi_per_sample,
)
from .nif_graph import (
    NifEdge,
    NifGraph,
    NifNode,
    build_nif_graph,
    export_graph,
    graph_from_json,
    graph_to_dot,
    graph_to_graphml,
    graph_to_json,
    pmi_edge_tensors,
)
from .network_science import (
    CommunityAssignment,
    WeightedGraph,
    betweenness,
    detect_communities,
    modularity,
)
from .attribution import (
    AttributionMatrix,
    SaliencyMap,
    attribution_csv,
    attribution_matrix,
    ks_two_sample,
    raw_mi_attribution,
    saliency_csv,
    saliency_map,
    saliency_map_batch,
)
from .pruning import PruneReport, default_steps, prune_report_csv, prune_sweep
