import numpy as np
import pytest
from scipy.special import digamma

from nifflow import (
    Dataset,
    EstimatorConfig,
    estimate_mi,
    forward,
    histogram_mi,
    ksg_mi,
    nif_feature,
    pmi_per_sample,
)
from conftest import cluster_model_and_data
from oracles import plugin_discrete_mi

CFG = EstimatorConfig()


def test_config_validation():
    for bad in (
        EstimatorConfig(kind="mine"),
        EstimatorConfig(k=0),
        EstimatorConfig(bins=1),
        EstimatorConfig(beta=-1.0),
        EstimatorConfig(relevance_mode="both"),
    ):
        with pytest.raises(ValueError):
            bad.validate()


def test_too_few_samples_and_nonfinite():
    with pytest.raises(ValueError, match="at least"):
        ksg_mi(np.arange(4.0), np.arange(4.0), EstimatorConfig(k=5))
    with pytest.raises(ValueError, match="finite"):
        ksg_mi(np.array([1.0, np.nan] + [0.0] * 8), np.arange(10.0), CFG)


def test_independent_gaussians_near_zero():
    rng = np.random.default_rng(42)
    est = ksg_mi(rng.normal(size=2000), rng.normal(size=2000), CFG)
    assert abs(est.value) <= 0.05


def test_correlated_gaussian_matches_closed_form():
    rho = 0.9
    truth = -0.5 * np.log(1 - rho**2)
    rng = np.random.default_rng(1)
    xy = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=2000)
    est = ksg_mi(xy[:, 0], xy[:, 1], CFG)
    assert est.value == pytest.approx(truth, abs=0.1)


def test_binary_identity_matches_plugin_oracle():
    rng = np.random.default_rng(3)
    coin = rng.integers(0, 2, 5000).astype(float)
    est = ksg_mi(coin, coin, CFG)
    oracle = plugin_discrete_mi(coin.tolist(), coin.tolist())
    assert est.value == pytest.approx(np.log(2), abs=0.03)
    assert est.value == pytest.approx(oracle, abs=0.03)


def test_constant_variable_gives_exact_zero():
    rng = np.random.default_rng(4)
    y = rng.normal(size=50)
    for kind in ("ksg", "histogram"):
        est = estimate_mi(np.full(50, 3.7), y, EstimatorConfig(kind=kind))
        assert est.value == 0.0
        assert (est.per_sample == 0.0).all()


def test_symmetry_is_exact():
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = np.maximum(rng.normal(size=300), 0)  # heavy ties
        y = x + rng.normal(size=300)
        assert ksg_mi(x, y, CFG).value == ksg_mi(y, x, CFG).value
        assert histogram_mi(x, y, CFG).value == histogram_mi(y, x, CFG).value


def test_mean_of_pmi_identity():
    rng = np.random.default_rng(6)
    for kind in ("ksg", "histogram"):
        for _ in range(10):
            x = rng.normal(size=150)
            y = np.round(x + rng.normal(size=150), 1)  # quantized: tie-rich
            est = estimate_mi(x, y, EstimatorConfig(kind=kind))
            assert abs(est.value - est.per_sample.mean()) <= 1e-9


def test_gaussian_sweep_property():
    for rho in (0.0, 0.3, 0.6, 0.9):
        truth = -0.5 * np.log(1 - rho**2)
        values = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            xy = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=2000)
            values.append(ksg_mi(xy[:, 0], xy[:, 1], CFG).value)
        assert np.mean(values) == pytest.approx(truth, abs=0.1)


def test_determinism_bit_identical():
    rng = np.random.default_rng(7)
    x = np.round(rng.normal(size=400), 1)
    y = np.round(rng.normal(size=400) + x, 1)
    cfg = EstimatorConfig(rng_seed=123)
    a = ksg_mi(x, y, cfg)
    b = ksg_mi(x, y, cfg)
    assert a.value == b.value
    np.testing.assert_array_equal(a.per_sample, b.per_sample)


def test_seed_changes_jitter_but_not_substance():
    rng = np.random.default_rng(8)
    x = np.round(rng.normal(size=500), 2)
    y = np.round(x + rng.normal(size=500), 2)
    a = ksg_mi(x, y, EstimatorConfig(rng_seed=0)).value
    b = ksg_mi(x, y, EstimatorConfig(rng_seed=99)).value
    assert a == pytest.approx(b, abs=0.05)


def test_permutation_invariance():
    rng = np.random.default_rng(9)
    x = np.maximum(rng.normal(size=600), 0)
    y = np.round(x + rng.normal(size=600), 1)
    base = ksg_mi(x, y, CFG).value
    perm = rng.permutation(600)
    assert abs(ksg_mi(x[perm], y[perm], CFG).value - base) <= 1e-9


def test_multivariate_x():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(800, 3))
    y = x @ np.array([1.0, -0.5, 0.2]) + 0.5 * rng.normal(size=800)
    est = ksg_mi(x, y, CFG)
    assert est.value > 0.5  # strong multivariate dependence is detected


def test_histogram_independent_uniform():
    rng = np.random.default_rng(11)
    est = histogram_mi(rng.uniform(size=5000), rng.uniform(size=5000), CFG)
    assert 0.0 <= est.value <= 0.08


def test_histogram_exact_identity():
    values = np.repeat([0.0, 1.0, 2.0, 3.0], 1000)
    est = histogram_mi(values, values, CFG)
    oracle = plugin_discrete_mi(values.tolist(), values.tolist())
    assert est.value == pytest.approx(np.log(4), abs=0.02)
    assert est.value == pytest.approx(oracle, abs=1e-12)


def test_histogram_deterministic_square():
    x = np.repeat([-1.0, 0.0, 1.0], 500)
    y = x**2
    est = histogram_mi(x, y, CFG)
    expected = np.log(3) - (2 / 3) * np.log(2)  # H(Y) for the induced 1/3-2/3 split
    assert est.value == pytest.approx(expected, abs=1e-12)
    assert est.value == pytest.approx(plugin_discrete_mi(x.tolist(), y.tolist()), abs=1e-12)


def test_pmi_hand_computed_configuration():
    # Sample 0 at the origin with k=3: joint radius 1.5, exactly three
    # neighbors strictly inside on each marginal.
    points = np.array(
        [
            [0.0, 0.0],
            [0.5, 0.5],
            [1.0, -1.0],
            [-1.5, 1.0],
            [1.2, 100.0],
            [50.0, 50.0],
            [60.0, 61.0],
            [70.0, 72.0],
            [80.0, 83.0],
            [90.0, 94.0],
        ]
    )
    cfg = EstimatorConfig(k=3)
    got = pmi_per_sample(points[:, 0], points[:, 1], 0, cfg)
    expected = digamma(3) + np.log(10) - 2 * np.log(4)
    assert got == pytest.approx(0.4527807058527321, abs=1e-12)
    assert got == pytest.approx(expected, abs=1e-12)


def test_pmi_mean_equals_value_and_index_check():
    rng = np.random.default_rng(12)
    x = rng.normal(size=50)
    y = x + rng.normal(size=50)
    est = ksg_mi(x, y, CFG)
    total = sum(pmi_per_sample(x, y, i, CFG) for i in range(50)) / 50
    assert total == pytest.approx(est.value, abs=1e-9)
    with pytest.raises(IndexError):
        pmi_per_sample(x, y, 50, CFG)


def test_pmi_duplicated_samples_identical():
    rng = np.random.default_rng(13)
    base_x = rng.normal(size=40)
    base_y = base_x + rng.normal(size=40)
    x = np.concatenate([base_x, base_x])
    y = np.concatenate([base_y, base_y])
    est = ksg_mi(x, y, CFG)
    np.testing.assert_array_equal(est.per_sample[:40], est.per_sample[40:])


def test_nif_feature_beta_zero_is_relevance():
    model, data = cluster_model_and_data(n_per_class=30, seed=2)
    record = forward(model, data)
    cfg = EstimatorConfig(beta=0.0)
    got = nif_feature(record, 0, (2, 1), cfg)
    want = estimate_mi(data.features[:, 0], record.layers[-1].matrix[:, 1], cfg).value
    assert got == want


def test_nif_feature_independent_features_keep_relevance():
    rng = np.random.default_rng(14)
    feats = rng.normal(size=(2000, 3))
    target = feats[:, 0] + 0.1 * rng.normal(size=2000)
    from nifflow import ActivationRecord, LayerActivations

    record = ActivationRecord(
        layers=[
            LayerActivations(kind="input", matrix=feats),
            LayerActivations(kind="dense", matrix=target.reshape(-1, 1)),
        ]
    )
    cfg = EstimatorConfig(beta=1.0)  # exaggerate any redundancy leakage
    with_red = nif_feature(record, 0, (1, 0), cfg)
    relevance = estimate_mi(feats[:, 0], target, cfg).value
    assert with_red == pytest.approx(relevance, abs=0.05)


def test_nif_feature_affine_in_beta():
    model, data = cluster_model_and_data(n_per_class=25, seed=3)
    record = forward(model, data)
    values = {}
    for beta in (0.0, 0.5, 2.0):
        values[beta] = nif_feature(record, 1, (1, 2), EstimatorConfig(beta=beta))
    redundancy = (values[0.0] - values[2.0]) / 2.0
    assert values[0.0] - values[0.5] == pytest.approx(0.5 * redundancy, abs=1e-12)
    assert values[0.5] - values[2.0] == pytest.approx(1.5 * redundancy, abs=1e-12)


def test_nif_feature_literal_mode():
    model, data = cluster_model_and_data(n_per_class=25, seed=4)
    record = forward(model, data)
    cfg = EstimatorConfig(relevance_mode="literal", beta=0.0)
    # with beta=0 the literal reading ignores the feature index entirely
    assert nif_feature(record, 0, (2, 0), cfg) == nif_feature(record, 3, (2, 0), cfg)


def test_nif_feature_beta_matches_pairwise_sum_on_iris_fixture():
    from conftest import require_bundle
    from nifflow import forward, load_dataset, load_model

    bundle = require_bundle("iris")
    model = load_model(bundle / "model.json")
    record = forward(model, load_dataset(bundle / "train.csv"))
    inputs = record.unit_layers()[0].matrix

    beta = 5e-4
    base = nif_feature(record, 2, (3, 0), EstimatorConfig(beta=0.0))
    tuned = nif_feature(record, 2, (3, 0), EstimatorConfig(beta=beta))
    pairwise_sum = sum(
        estimate_mi(inputs[:, 2], inputs[:, j], EstimatorConfig()).value
        for j in (0, 1, 3)
    )
    assert base - tuned == pytest.approx(beta * pairwise_sum, abs=1e-12)


def test_nif_feature_index_errors():
    model, data = cluster_model_and_data(n_per_class=20, seed=5)
    record = forward(model, data)
    with pytest.raises(IndexError):
        nif_feature(record, 9, (1, 0), CFG)
    with pytest.raises(IndexError):
        nif_feature(record, 0, (0, 0), CFG)
    with pytest.raises(IndexError):
        nif_feature(record, 0, (1, 99), CFG)
