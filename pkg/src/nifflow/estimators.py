"""Mutual information estimation between empirical variables, in nats.

Two estimators are provided: a mixed continuous-discrete k-nearest-neighbor
estimator (digamma-corrected, Chebyshev metric) and a binned plug-in
estimator. Both report the overall estimate together with the per-sample
pointwise terms whose mean it is, so per-sample PMI comes for free.

Sign convention: PMI is ``log(joint / (marginal * marginal))``, positive when
the observed pair is more likely than under independence. Finite-sample k-NN
estimates can come out slightly negative; they are reported as-is and clamped
only where path products need nonnegative weights (see ``nif_graph``).

Variables that are constant across all samples are point masses: they carry
no information, and both estimators return exact zeros for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .model_io import ActivationRecord

__all__ = [
    "EstimatorConfig",
    "MiEstimate",
    "EstimationError",
    "estimate_mi",
    "ksg_mi",
    "histogram_mi",
    "pmi_per_sample",
    "nif_feature",
]

ESTIMATOR_KINDS = ("ksg", "histogram")
RELEVANCE_MODES = ("per_feature", "literal")

# Magnitude of the deterministic tie-breaking jitter. Small enough to be
# irrelevant to any real distance scale, large enough to separate distinct
# O(1) values.
_JITTER_SCALE = 1e-10


class EstimationError(RuntimeError):
    """An estimator failed; carries context added by callers."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by every estimator call.

    ``beta`` weighs the redundancy penalty in the flow measure.
    ``relevance_mode`` picks how the relevance term of ``nif_feature`` is
    read: ``per_feature`` uses the single source variable (redundancy over
    all siblings), ``literal`` uses the whole source layer (redundancy over
    preceding siblings only).
    """

    kind: str = "ksg"
    k: int = 5
    bins: int = 16
    beta: float = 5e-4
    relevance_mode: str = "per_feature"
    rng_seed: int = 0

    def validate(self) -> None:
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.relevance_mode not in RELEVANCE_MODES:
            raise ValueError(f"unknown relevance_mode {self.relevance_mode!r}")


@dataclass
class MiEstimate:
    """An MI estimate plus the per-sample pointwise terms it averages."""

    value: float
    per_sample: np.ndarray
    k_used: int
    n: int


def _as_columns(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a vector or an N x d matrix, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def _is_constant(mat: np.ndarray) -> bool:
    return bool(np.all(mat == mat[0]))


def _mix64(h: int) -> int:
    h &= 0xFFFFFFFFFFFFFFFF
    h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return h ^ (h >> 31)


def _value_jitter(col: np.ndarray, key: int) -> np.ndarray:
    """Deterministic jitter keyed to each value's bit pattern.

    Equal values receive equal offsets, so exact duplicates (discrete mass
    such as ReLU zeros) stay exactly tied while distinct values stop sharing
    distances. Keying to values rather than positions keeps estimates
    invariant under sample permutation.
    """
    bits = col.view(np.uint64)
    z = bits ^ np.uint64(key)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    unit = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (2.0 * unit - 1.0) * _JITTER_SCALE


def _jitter_ties(mat: np.ndarray, seed: int) -> np.ndarray:
    """Apply value-keyed jitter to columns that contain non-degenerate ties.

    Constant columns are left untouched so point masses keep exact zero
    distances and flow through the discrete counting branch.
    """
    out = mat
    for j in range(mat.shape[1]):
        col = mat[:, j]
        distinct = np.unique(col).size
        if distinct <= 1 or distinct == col.size:
            continue
        if out is mat:
            out = mat.copy()
        key = _mix64((seed & 0xFFFFFFFFFFFFFFFF) * 0x9E3779B97F4A7C15 + 0xD1B54A32D192ED03 * (j + 1))
        out[:, j] = col + _value_jitter(np.ascontiguousarray(col), key)
    return out


def ksg_mi(x, y, config: EstimatorConfig = EstimatorConfig()) -> MiEstimate:
    """Mixed continuous-discrete k-NN MI estimate between x and y.

    Per sample, the pointwise term is ``digamma(k) + log N - log(n_x + 1)
    - log(n_y + 1)`` where n_x and n_y count neighbors strictly inside the
    joint k-NN radius (Chebyshev metric). Samples whose k-th joint neighbor
    sits at distance zero are tie points; for those the counts switch to
    exact-zero-distance matches and k is replaced by the tie multiplicity.
    """
    config.validate()
    x = _as_columns(x, "x")
    y = _as_columns(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"x and y disagree on sample count: {n} vs {y.shape[0]}")
    if n < config.k + 1:
        raise ValueError(f"need at least k+1={config.k + 1} samples, got {n}")

    if _is_constant(x) or _is_constant(y):
        return MiEstimate(value=0.0, per_sample=np.zeros(n), k_used=config.k, n=n)

    xj = _jitter_ties(x, config.rng_seed)
    yj = _jitter_ties(y, config.rng_seed)
    joint = np.hstack([xj, yj])

    tree_joint = cKDTree(joint)
    tree_x = cKDTree(xj)
    tree_y = cKDTree(yj)

    rho = tree_joint.query(joint, k=[config.k + 1], p=np.inf)[0][:, 0]
    # Largest radius strictly inside rho; exact zeros stay zero so tie points
    # count exact matches only.
    radius = np.nextafter(rho, 0.0)
    n_x = tree_x.query_ball_point(xj, radius, p=np.inf, return_length=True) - 1
    n_y = tree_y.query_ball_point(yj, radius, p=np.inf, return_length=True) - 1

    k_eff = np.full(n, float(config.k))
    ties = rho == 0.0
    if ties.any():
        k_eff[ties] = (
            tree_joint.query_ball_point(joint[ties], 0.0, p=np.inf, return_length=True) - 1
        )

    # grouping the marginal terms keeps swapping x and y bit-exact
    per_sample = digamma(k_eff) + np.log(n) - (np.log(n_x + 1.0) + np.log(n_y + 1.0))
    return MiEstimate(value=float(per_sample.mean()), per_sample=per_sample, k_used=config.k, n=n)


def _bin_ids(mat: np.ndarray, bins: int) -> np.ndarray:
    """Row ids after binning each column into up to ``bins`` uniform bins."""
    cols = np.empty(mat.shape, dtype=np.int64)
    for j in range(mat.shape[1]):
        col = mat[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            cols[:, j] = 0
        else:
            cols[:, j] = np.clip(
                ((col - lo) * (bins / (hi - lo))).astype(np.int64), 0, bins - 1
            )
    if mat.shape[1] == 1:
        flat = cols[:, 0]
    else:
        _, flat = np.unique(cols, axis=0, return_inverse=True)
    # compact to contiguous ids so bincount stays small
    _, ids = np.unique(flat, return_inverse=True)
    return ids


def histogram_mi(x, y, config: EstimatorConfig = EstimatorConfig()) -> MiEstimate:
    """Binned plug-in MI estimate; per-sample terms are log joint-over-marginals
    at each sample's bin."""
    config.validate()
    x = _as_columns(x, "x")
    y = _as_columns(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"x and y disagree on sample count: {n} vs {y.shape[0]}")
    if n < config.k + 1:
        raise ValueError(f"need at least k+1={config.k + 1} samples, got {n}")

    xid = _bin_ids(x, config.bins)
    yid = _bin_ids(y, config.bins)
    n_y_levels = int(yid.max()) + 1
    joint = xid * n_y_levels + yid

    count_x = np.bincount(xid)
    count_y = np.bincount(yid)
    count_joint = np.bincount(joint)

    per_sample = np.log(
        count_joint[joint].astype(np.float64) * n
    ) - np.log(count_x[xid].astype(np.float64) * count_y[yid].astype(np.float64))
    return MiEstimate(value=float(per_sample.mean()), per_sample=per_sample, k_used=0, n=n)


def estimate_mi(x, y, config: EstimatorConfig = EstimatorConfig()) -> MiEstimate:
    """Dispatch on ``config.kind``."""
    if config.kind == "histogram":
        return histogram_mi(x, y, config)
    return ksg_mi(x, y, config)


def pmi_per_sample(x, y, i: int, config: EstimatorConfig = EstimatorConfig()) -> float:
    """Pointwise MI of sample ``i``: the i-th term of the estimate's mean."""
    est = estimate_mi(x, y, config)
    if not 0 <= i < est.n:
        raise IndexError(f"sample index {i} out of range for {est.n} samples")
    return float(est.per_sample[i])


def nif_feature(
    activations: ActivationRecord,
    feature_index: int,
    target: tuple[int, int],
    config: EstimatorConfig = EstimatorConfig(),
) -> float:
    """Information flow from one input feature to a unit in a later layer:
    relevance minus beta-weighted redundancy against sibling features.

    ``target`` is ``(layer, unit)`` in the unit-layer view (layer 0 is the
    input; flatten layers do not count).
    """
    config.validate()
    units = activations.unit_layers()
    inputs = units[0].matrix
    n_features = inputs.shape[1]
    if not 0 <= feature_index < n_features:
        raise IndexError(f"feature index {feature_index} out of range for {n_features} features")
    layer, unit = target
    if not 1 <= layer < len(units):
        raise IndexError(f"target layer {layer} out of range (1..{len(units) - 1})")
    width = units[layer].matrix.shape[1]
    if not 0 <= unit < width:
        raise IndexError(f"target unit {unit} out of range for layer {layer} width {width}")

    xi = inputs[:, feature_index]
    q = units[layer].matrix[:, unit]
    if np.all(xi == xi[0]) or np.all(q == q[0]):
        return 0.0  # a point mass carries no flow; nothing to discount
    if config.relevance_mode == "literal":
        relevance = estimate_mi(inputs, q, config).value
        siblings = range(feature_index)
    else:
        relevance = estimate_mi(xi, q, config).value
        siblings = (j for j in range(n_features) if j != feature_index)
    if config.beta == 0.0:
        return relevance
    redundancy = sum(estimate_mi(xi, inputs[:, j], config).value for j in siblings)
    return relevance - config.beta * redundancy
