import os
import shutil

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from weightzoo.exceptions import CheckpointError, ValidationError
from weightzoo.features import WeightFeatures, extract, featurize_zoo, layer_norms, read_table, stat_block
from weightzoo.nn import ParameterSet, init_params, mlp, base_cnn
from weightzoo.zoo import load_zoo, sample_hyperparams


def _linear_percentile(values, q):
    """Order-statistic interpolation at position q/100 * (n - 1)."""
    s = sorted(values)
    pos = q / 100 * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


@pytest.fixture(scope="module")
def cnn_params():
    rng = np.random.default_rng(0)
    params = init_params(base_cnn((8, 8, 1)), "he_normal", 0.3, seed=5, dtype=np.float64)
    return params.map(lambda a: a + 0.01 * rng.standard_normal(a.shape))


def test_stat_block_anchors():
    b = stat_block([1, 2, 3, 4, 5])
    assert (b.mean, b.variance) == (3, 2)
    assert (b.q0, b.q25, b.q50, b.q75, b.q100) == (1, 2, 3, 4, 5)
    c = stat_block([7.5] * 4)
    assert c.variance == 0 and {c.q0, c.q25, c.q50, c.q75, c.q100} == {7.5}
    assert stat_block([0, 10]).q25 == 2.5


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e3, 1e3)))
def test_stat_block_matches_order_statistics(values):
    b = stat_block(values)
    for q, got in zip((0, 25, 50, 75, 100), (b.q0, b.q25, b.q50, b.q75, b.q100)):
        assert got == pytest.approx(_linear_percentile(values, q), rel=1e-12, abs=1e-9)
    mean = sum(values) / len(values)
    assert b.variance == pytest.approx(sum((v - mean) ** 2 for v in values) / len(values), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize(
    "kind, size",
    [
        ("flat_all", 4970),
        ("flat_layer:4", 170),
        ("stats_global", 7),
        ("stats_per_layer", 56),
        ("stats_layer_subset:4", 14),
        ("stats_layer_subset:final", 14),
        ("stats_layer_subset:1,4", 28),
        ("norms_l1", 8),
        ("norms_l2", 8),
        ("bias_range", 4),
        ("hyperparams", 8),
        ("hyperparams_lr", 1),
        ("hyperparams_plus_flat", 4978),
    ],
)
def test_feature_dimensions(cnn_params, kind, size):
    assert len(extract(cnn_params, kind, sample_hyperparams(0, 0))) == size


def test_per_layer_stats_follow_blocks(cnn_params):
    fv = extract(cnn_params, "stats_per_layer")
    values = dict(zip(fv.names, fv.values))
    kernel = cnn_params.kernels[2].ravel()
    assert values["L3.kernel.mean"] == pytest.approx(kernel.mean(), rel=1e-12)
    assert values["L3.kernel.q75"] == pytest.approx(_linear_percentile(kernel, 75), rel=1e-12)
    assert values["L4.bias.q100"] == cnn_params.biases[3].max()
    final = extract(cnn_params, "stats_layer_subset:final").values
    np.testing.assert_array_equal(final, fv.values[-14:])


def test_flat_all_is_layer_order(cnn_params):
    np.testing.assert_array_equal(extract(cnn_params, "flat_all").values, cnn_params.flatten())


def test_norms():
    params = ParameterSet([np.array([[3.0], [-4.0]])], [np.array([0.0])])
    assert list(layer_norms(params, 2).values) == [5.0, 0.0]
    assert list(layer_norms(params, 1).values) == [7.0, 0.0]


@given(st.floats(1e-3, 1e3))
def test_norms_are_homogeneous(c):
    params = init_params(mlp((2, 2, 1), hidden=(3,)), "normal", 1.0, seed=1, dtype=np.float64)
    for p in (1, 2):
        np.testing.assert_allclose(layer_norms(params.scale(c), p).values, c * layer_norms(params, p).values, rtol=1e-12)


def test_fresh_init_bias_range_is_zero():
    params = init_params(base_cnn(), "xavier_normal", 0.2, seed=0)
    assert not extract(params, "bias_range").values.any()


def test_bad_kinds():
    params = init_params(base_cnn(), "normal", 0.1, seed=0)
    for kind in ("stats_layer_subset:9", "flat_layer:0", "moments", "stats_layer_subset:1,1"):
        with pytest.raises(ValidationError):
            extract(params, kind)
    with pytest.raises(ValidationError):
        extract(params, "hyperparams")


def test_transformer_api(cnn_params):
    t = WeightFeatures(kind="stats_global")
    out = t.fit_transform([cnn_params, cnn_params.scale(2.0)])
    assert out.shape == (2, 7)
    assert list(t.get_feature_names_out())[:2] == ["all.mean", "all.variance"]
    assert t.get_params() == {"kind": "stats_global"}


def test_table_roundtrip_and_determinism(tiny_zoo, tmp_path):
    table = featurize_zoo(tiny_zoo, "stats_per_layer")
    assert table.X.shape == (24, 56)
    np.testing.assert_array_equal(table.y, [r.test_accuracy for r in tiny_zoo])
    table.write(tmp_path / "a.csv")
    featurize_zoo(load_zoo(tiny_zoo.root), "stats_per_layer").write(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    back = read_table(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.X, table.X)
    np.testing.assert_array_equal(back.y, table.y)
    assert back.kind == "stats_per_layer" and back.model_ids == table.model_ids


def test_missing_checkpoint_names_model(tiny_zoo, tmp_path):
    root = tmp_path / "zoo"
    shutil.copytree(tiny_zoo.root, root)
    os.remove(root / "checkpoints" / "m000005.wzoo")
    with pytest.raises(CheckpointError, match="m000005"):
        featurize_zoo(load_zoo(root), "stats_global")
