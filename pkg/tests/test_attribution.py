import numpy as np
import pytest

from nifflow import (
    Dataset,
    EstimatorConfig,
    NifEdge,
    NifGraph,
    NifNode,
    attribution_csv,
    attribution_matrix,
    forward,
    ks_two_sample,
    pmi_edge_tensors,
    raw_mi_attribution,
    saliency_csv,
    saliency_map,
    saliency_map_batch,
)
from conftest import cluster_model_and_data, image_dataset, tiny_conv_model
from oracles import brute_path_attribution, discrete_entropy

CFG = EstimatorConfig()


def graph_from_matrices(mats, mode="mean_mi", sample_index=None):
    """Hand-build a layered graph carrying the given per-layer weight matrices."""
    sizes = (mats[0].shape[0],) + tuple(m.shape[1] for m in mats)
    kinds = ["input_feature"] + ["hidden_neuron"] * (len(sizes) - 2) + ["class_output"]
    nodes = tuple(
        NifNode(layer=l, unit=u, kind=kinds[l]) for l in range(len(sizes)) for u in range(sizes[l])
    )
    edges = []
    for l, mat in enumerate(mats):
        peak = max(mat.max(), 0.0)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                clamped = max(float(mat[i, j]), 0.0)
                edges.append(
                    NifEdge(
                        src=(l, i),
                        dst=(l + 1, j),
                        weight_raw=float(mat[i, j]),
                        weight_norm=clamped / peak if peak > 0 else 0.0,
                    )
                )
    return NifGraph(
        layer_sizes=sizes,
        nodes=nodes,
        edges=tuple(edges),
        mode=mode,
        sample_index=sample_index,
        estimator_config=CFG,
        model_fingerprint="synthetic",
    )


def test_single_layer_attribution_is_edge_matrix():
    mat = np.array([[0.3, 0.0, 1.2], [0.5, 0.9, 0.1]])
    graph = graph_from_matrices([mat])
    np.testing.assert_array_equal(attribution_matrix(graph).values, mat)


def test_all_ones_2_2_2_counts_paths():
    graph = graph_from_matrices([np.ones((2, 2)), np.ones((2, 2))])
    np.testing.assert_array_equal(attribution_matrix(graph).values, np.full((2, 2), 2.0))


def test_random_3_4_3_matches_enumeration():
    rng = np.random.default_rng(1)
    mats = [rng.uniform(0, 1.5, size=(3, 4)), rng.uniform(0, 1.5, size=(4, 3))]
    graph = graph_from_matrices(mats)
    got = attribution_matrix(graph).values
    want = brute_path_attribution(mats)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_dp_equals_enumeration_on_random_layered_graphs():
    rng = np.random.default_rng(2)
    for _ in range(30):
        depth = int(rng.integers(1, 4))  # up to 4 unit layers
        sizes = [int(s) for s in rng.integers(1, 6, size=depth + 1)]
        mats = [rng.uniform(0, 1.5, size=(sizes[i], sizes[i + 1])) for i in range(depth)]
        graph = graph_from_matrices(mats)
        got = attribution_matrix(graph).values
        want = brute_path_attribution(mats)
        assert np.max(np.abs(got - want)) <= 1e-12


def test_negative_raw_weights_are_clamped_in_attribution():
    mats = [np.array([[0.5, -0.4]]), np.array([[1.0], [1.0]])]
    graph = graph_from_matrices(mats)
    # the negative link contributes nothing, not a negative product
    np.testing.assert_array_equal(attribution_matrix(graph).values, [[0.5]])


def test_attribution_monotone_in_edge_weight():
    rng = np.random.default_rng(3)
    mats = [rng.uniform(0, 1, size=(3, 3)), rng.uniform(0, 1, size=(3, 2))]
    base = attribution_matrix(graph_from_matrices(mats)).values
    bumped = [mats[0].copy(), mats[1].copy()]
    bumped[0][1, 2] += 0.5
    higher = attribution_matrix(graph_from_matrices(bumped)).values
    assert (higher >= base - 1e-15).all()


def test_raw_mi_attribution_indicator_feature():
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 2, 2000)
    feats = np.column_stack([labels.astype(float), rng.normal(size=2000)])
    data = Dataset(features=feats, labels=labels, feature_names=["ind", "noise"])
    attr = raw_mi_attribution(data, CFG)
    assert attr.values.shape == (2, 2)
    entropy = discrete_entropy(labels.tolist())
    assert attr.values[0, 0] == pytest.approx(entropy, abs=0.05)
    # the pointwise log(n+1) form carries a small negative bias at k=5 for
    # continuous-vs-discrete pairs; near zero, not within 0.05 of it
    assert abs(attr.values[1, 0]) <= 0.08
    assert attr.feature_names == ["ind", "noise"]


def test_raw_mi_attribution_permutation_invariant():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 3, 300)
    feats = rng.normal(size=(300, 2)) + labels[:, None]
    data = Dataset(features=feats, labels=labels)
    base = raw_mi_attribution(data, CFG).values
    perm = rng.permutation(300)
    shuffled = Dataset(features=feats[perm], labels=labels[perm])
    np.testing.assert_allclose(raw_mi_attribution(shuffled, CFG).values, base, atol=1e-9)


def test_ks_identical_samples():
    d, p = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert d == 0.0
    assert p == 1.0


def test_ks_disjoint_supports():
    d, _ = ks_two_sample([0.0, 0.1, 0.2], [5.0, 6.0])
    assert d == 1.0


def test_ks_hand_case_one_third():
    d, p = ks_two_sample([1, 2, 3], [2, 3, 4])
    assert d == pytest.approx(1 / 3, abs=1e-15)
    assert 0.0 <= p <= 1.0


def test_ks_symmetry_and_monotone_invariance():
    rng = np.random.default_rng(6)
    a = rng.normal(size=40)
    b = rng.normal(size=55) + 0.3
    d_ab, p_ab = ks_two_sample(a, b)
    d_ba, p_ba = ks_two_sample(b, a)
    assert d_ab == d_ba and p_ab == p_ba
    d_t, p_t = ks_two_sample(np.exp(a), np.exp(b))  # strictly increasing transform
    assert d_t == d_ab and p_t == p_ab


def test_ks_empty_input():
    with pytest.raises(ValueError, match="non-empty"):
        ks_two_sample([], [1.0])


def test_saliency_two_factor_oracle():
    # one conv channel: every pixel-to-class path is pixel -> channel -> class
    model = tiny_conv_model(seed=7, channels=1)
    rng = np.random.default_rng(7)
    data = image_dataset(rng, n=60)
    record = forward(model, data)
    tensors = pmi_edge_tensors(record, CFG)
    sample, cls = 11, 1
    smap = saliency_map(model, data, sample, cls, CFG)
    assert smap.values.shape == (4, 4, 1)
    for p in range(16):
        want = tensors[0][sample, p, 0] * tensors[1][sample, 0, cls]
        assert smap.values.reshape(-1)[p] == pytest.approx(want, abs=1e-15)


def test_saliency_constant_pixels_are_exactly_zero():
    model = tiny_conv_model(seed=8, channels=2)
    rng = np.random.default_rng(8)
    data = image_dataset(rng, n=50, constant_pixels=(0, 5))
    smap = saliency_map(model, data, 3, 0, CFG)
    flat = smap.values.reshape(-1)
    assert flat[0] == 0.0 and flat[5] == 0.0
    assert np.abs(flat).max() > 0.0


def test_saliency_batch_matches_single():
    model = tiny_conv_model(seed=9, channels=2)
    rng = np.random.default_rng(9)
    data = image_dataset(rng, n=40)
    batch = saliency_map_batch(model, data, [(0, 0), (1, 1)], CFG)
    single = saliency_map(model, data, 1, 1, CFG)
    np.testing.assert_array_equal(batch[1].values, single.values)


def test_saliency_requires_conv_model():
    model, data = cluster_model_and_data(n_per_class=20)
    with pytest.raises(ValueError, match="convolutional"):
        saliency_map(model, data, 0, 0, CFG)


def test_saliency_index_errors():
    model = tiny_conv_model(seed=10)
    data = image_dataset(np.random.default_rng(10), n=30)
    with pytest.raises(IndexError):
        saliency_map(model, data, 99, 0, CFG)
    with pytest.raises(IndexError):
        saliency_map(model, data, 0, 5, CFG)


def test_csv_exports():
    mat = attribution_matrix(
        graph_from_matrices([np.array([[1.0, 2.0]])]), feature_names=["width"]
    )
    text = attribution_csv(mat, run_config={"seed": 0})
    lines = text.strip().split("\n")
    assert lines[0].startswith("# config:")
    assert lines[1] == "feature,class,value"
    assert lines[2] == "width,0,1.0"

    model = tiny_conv_model(seed=11)
    data = image_dataset(np.random.default_rng(11), n=30)
    smap = saliency_map(model, data, 0, 0, CFG)
    stext = saliency_csv(smap)
    assert stext.splitlines()[0] == "pixel,class,value"
    assert len(stext.strip().splitlines()) == 1 + 16
