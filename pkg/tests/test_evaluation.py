import json

import numpy as np
import pytest

from weightzoo.estimators import GBMRegressor, RandomForestRegressor
from weightzoo.evaluation import EvalReport, evaluate, transfer_matrix
from weightzoo.exceptions import ShapeError, ValidationError
from weightzoo.features import featurize_zoo
from weightzoo.metrics import kendall_tau
from weightzoo.probes import ProbeModification, apply_modification, invariance_probe
from weightzoo.zoo import split_zoo


@pytest.fixture(scope="module")
def tables(tiny_zoo):
    train, test = split_zoo(tiny_zoo, 16, split_seed=0)
    return featurize_zoo(train, "stats_per_layer"), featurize_zoo(test, "stats_per_layer")


@pytest.fixture(scope="module")
def flat_model(tiny_zoo):
    table = featurize_zoo(tiny_zoo, "flat_all")
    return GBMRegressor(num_trees=30, num_leaves=4, colsample_bytree=0.3).fit_table(table)


def test_report_fields_and_files(tables, tmp_path):
    train, test = tables
    model = RandomForestRegressor(num_trees=4).fit_table(train)
    report = evaluate(model, test)
    assert report.n == len(test) == len(report.scatter)
    assert report.kendall_tau == kendall_tau(test.y, model.predict(test.X))
    assert report.provenance["model_ids"] == test.model_ids
    report.write(tmp_path / "eval.json")
    doc = json.loads((tmp_path / "eval.json").read_text())
    assert doc["n"] == report.n and doc["provenance"]["feature_kind"] == "stats_per_layer"
    lines = (tmp_path / "eval.scatter.csv").read_text().splitlines()
    assert lines[0] == "true,predicted" and len(lines) == report.n + 1


def test_report_invariants():
    with pytest.raises(ValidationError):
        EvalReport(0.1, 0.1, 0.5, 0.2, n=3, scatter=[(0.1, 0.2)])
    with pytest.raises(ValidationError):
        EvalReport(0.1, 0.1, 1.5, 0.2, n=1, scatter=[(0.1, 0.2)])


def test_transfer_diagonal_matches_evaluate(tables):
    train, test = tables
    a = GBMRegressor(num_trees=20, num_leaves=4).fit_table(train)
    b = RandomForestRegressor(num_trees=4).fit_table(train)
    matrix = transfer_matrix([a, b], [test, train])
    assert matrix.shape == (2, 2)
    assert matrix[0, 0] == evaluate(a, test).kendall_tau
    assert matrix[1, 1] == evaluate(b, train).kendall_tau


def test_transfer_rejects_mixed_kinds(tables, tiny_zoo):
    train, _ = tables
    model = GBMRegressor(num_trees=3).fit_table(train)
    with pytest.raises(ShapeError):
        transfer_matrix([model], [featurize_zoo(tiny_zoo, "stats_global")])


def _multiset(params):
    return np.sort(params.flatten())


@pytest.mark.parametrize("mix", [False, True])
@pytest.mark.parametrize("kind", ["global_permute", "permute_all_layers", "permute_conv_layers", "permute_final_layer"])
def test_permutations_keep_values(tiny_zoo, kind, mix):
    params = tiny_zoo.load_params(tiny_zoo.ok_records[0])
    before = params.flatten().copy()
    out = apply_modification(params, ProbeModification(kind, mix_bias_weights=mix, seed=1))
    np.testing.assert_array_equal(_multiset(out), _multiset(params))
    np.testing.assert_array_equal(params.flatten(), before)
    assert [k.shape for k in out.kernels] == [k.shape for k in params.kernels]
    if not mix:
        kernel_values = np.sort(np.concatenate([k.ravel() for k in out.kernels]))
        np.testing.assert_array_equal(kernel_values, np.sort(np.concatenate([k.ravel() for k in params.kernels])))
    if kind == "permute_conv_layers":
        np.testing.assert_array_equal(out.kernels[-1], params.kernels[-1])
        np.testing.assert_array_equal(out.biases[-1], params.biases[-1])
    if kind == "permute_final_layer":
        for i in range(params.num_layers - 1):
            np.testing.assert_array_equal(out.kernels[i], params.kernels[i])


def test_scale_modification(tiny_zoo):
    params = tiny_zoo.load_params(tiny_zoo.ok_records[0])
    out = apply_modification(params, ProbeModification("scale", factor=0.5))
    np.testing.assert_array_equal(out.flatten(), params.flatten() * np.float32(0.5))


def test_bad_modifications():
    with pytest.raises(ValidationError):
        ProbeModification("rotate")
    with pytest.raises(ValidationError):
        ProbeModification("scale", factor=0.0)


def test_identity_probe_is_zero(flat_model, tiny_zoo):
    mads = invariance_probe(flat_model, tiny_zoo, [ProbeModification("scale", factor=1.0)], sample_count=10)
    assert mads == {"scale:1": 0.0}


def test_probe_is_seeded(flat_model, tiny_zoo):
    mods = [ProbeModification("global_permute", mix_bias_weights=True, seed=3)]
    first = invariance_probe(flat_model, tiny_zoo, mods, sample_count=8, seed=2)
    assert first == invariance_probe(flat_model, tiny_zoo, mods, sample_count=8, seed=2)
    assert first["global_permute:mixed"] >= 0


def test_probe_needs_flat_all_model(tables, tiny_zoo):
    model = GBMRegressor(num_trees=3).fit_table(tables[0])
    with pytest.raises(ValidationError):
        invariance_probe(model, tiny_zoo, [ProbeModification("scale", factor=2.0)], sample_count=2)
