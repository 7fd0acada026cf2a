"""Acceptance criteria 1-12, one test each.

Every test reports a PASS/FAIL line (collected and re-printed in the pytest
terminal summary) and fails when its criterion is not met. The desk-scale
criteria use the cached zoos from ``zoo_cache`` with seeds fixed up front:
sweep seeds 1/2/3, split seed 0, search seed 7.
"""
import json
import os
import shutil

import numpy as np
import pytest

from weightzoo.estimators import random_search
from weightzoo.evaluation import evaluate, transfer_matrix
from weightzoo.exceptions import LeakageError
from weightzoo.features import extract, featurize_zoo
from weightzoo.metrics import kendall_tau, r2_score
from weightzoo.nn import INITIALIZERS, accuracy, forward, init_params, param_count, base_cnn
from weightzoo.probes import ProbeModification, invariance_probe
from weightzoo.zoo import load_zoo, split_zoo

from acceptance_log import record
from cli_pipeline import run_pipeline
from oracles import finite_difference_error, kendall_pairs, permute_filters
from zoo_cache import get_zoo

BUDGET = 50
SEARCH_SEED = 7
SPLIT_SEED = 0


# shared desk-scale state


@pytest.fixture(scope="module")
def zoo_a():
    return get_zoo("cnn_a")


@pytest.fixture(scope="module")
def split_a(zoo_a):
    return split_zoo(zoo_a, 200, SPLIT_SEED)


@pytest.fixture(scope="module")
def tables_a(split_a):
    cache = {}

    def get(kind):
        if kind not in cache:
            cache[kind] = tuple(featurize_zoo(part, kind) for part in split_a)
        return cache[kind]

    return get


@pytest.fixture(scope="module")
def searched(tables_a):
    cache = {}

    def get(kind, estimator="gbm"):
        if (kind, estimator) not in cache:
            train, _ = tables_a(kind)
            cache[kind, estimator] = random_search(train, estimator, BUDGET, search_seed=SEARCH_SEED)[0]
        return cache[kind, estimator]

    return get


def _holdout(model, table):
    return evaluate(model, table)


# 1-6: exact property suites


def test_criterion_01_architecture():
    params = init_params(base_cnn(), "he_normal", 1.0, seed=0)
    sizes = {
        "params": param_count(base_cnn()),
        "flat_layer:4": len(extract(params, "flat_layer:4")),
        "stats_global": len(extract(params, "stats_global")),
        "stats_per_layer": len(extract(params, "stats_per_layer")),
        "stats_layer_subset:4": len(extract(params, "stats_layer_subset:4")),
        "norms_l2": len(extract(params, "norms_l2")),
    }
    want = {"params": 4970, "flat_layer:4": 170, "stats_global": 7, "stats_per_layer": 56,
            "stats_layer_subset:4": 14, "norms_l2": 8}
    record(1, sizes == want, f"sizes {sizes}")


def test_criterion_02_gradients():
    rng = np.random.default_rng(2020)
    worst = 0.0
    for i in range(20):
        activation = ("relu", "tanh")[i % 2]
        spec = base_cnn((8, 8, 1), activation=activation)
        init = INITIALIZERS[i % len(INITIALIZERS)]
        params = init_params(spec, init, float(rng.uniform(0.5, 2.0)), seed=i, dtype=np.float64)
        params = params.map(lambda a: a + 0.05 * rng.standard_normal(a.shape))  # non-zero biases
        x = rng.uniform(-1, 1, (int(rng.integers(2, 9)), 8, 8, 1))
        y = rng.integers(0, 10, len(x))
        l2 = float(rng.choice([0.0, 1e-3, 0.1]))
        worst = max(worst, finite_difference_error(spec, params, x, y, l2=l2, coords=150, rng=rng))
    record(2, worst < 1e-4, f"max relative error {worst:.3g} over 20 nets (threshold 1e-4)")


def test_criterion_03_relu_invariances():
    rng = np.random.default_rng(33)
    spec = base_cnn((8, 8, 1))
    scale_mismatch, perm_worst = 0, 0.0
    for i in range(100):
        init = INITIALIZERS[i % len(INITIALIZERS)]
        params = init_params(spec, init, float(rng.uniform(0.1, 2.0)), seed=i)
        x = rng.uniform(-1, 1, (32, 8, 8, 1)).astype(np.float32)
        y = rng.integers(0, 10, 32)
        base = accuracy(spec, params, x, y)
        scale_mismatch += sum(accuracy(spec, params.scale(c), x, y) != base for c in (2, 10, 100))
        wide = params.astype(np.float64)
        perms = [rng.permutation(16) for _ in range(3)]
        diff = np.abs(forward(spec, permute_filters(wide, perms), x) - forward(spec, wide, x)).max()
        perm_worst = max(perm_worst, float(diff))
    ok = scale_mismatch == 0 and perm_worst <= 1e-6
    record(3, ok, f"{scale_mismatch} scale mismatches; max permuted logit diff {perm_worst:.3g} (threshold 1e-6)")


def test_criterion_04_kendall_oracle():
    rng = np.random.default_rng(44)
    mismatches = 0
    for i in range(200):
        n = int(rng.integers(2, 501))
        if i % 2:
            a, b = rng.integers(0, 6, n).astype(float), rng.integers(0, 6, n).astype(float)
        else:
            a, b = rng.normal(size=n), rng.normal(size=n)
        a[0], a[-1] = 0.0, 7.0  # keep both sides from being all ties
        b[0], b[-1] = 7.0, 0.0
        mismatches += kendall_tau(a, b) != kendall_pairs(a, b)
    record(4, mismatches == 0, f"{mismatches} of 200 pairs differ from pair counting")


def test_criterion_05_metric_anchors():
    t = np.array([0.12, 0.5, 0.33, 0.91, 0.2])
    checks = {
        "r2 perfect": (r2_score(t, t), 1.0),
        "r2 mean": (r2_score(t, np.full(5, t.mean())), 0.0),
        "r2 example": (r2_score([0, 0, 1, 1], [0.25, 0.25, 0.75, 0.75]), 1 - 0.0625 / 0.25),
        "tau identity": (kendall_tau([1, 2, 3], [1, 2, 3]), 1.0),
        "tau reverse": (kendall_tau([1, 2, 3], [3, 2, 1]), -1.0),
        "tau example": (kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]), (5 - 1) / 6),
    }
    bad = {k: v for k, (v, want) in checks.items() if abs(v - want) > 1e-12}
    record(5, not bad, f"off by > 1e-12: {bad or 'none'}")


def test_criterion_06_gbm():
    from weightzoo.estimators import GBMRegressor
    from oracles import exhaustive_best_split

    rng = np.random.default_rng(66)
    monotone = 0
    for seed in range(10):
        X = rng.normal(size=(100, 5))
        y = rng.uniform(size=100)
        model = GBMRegressor(num_trees=40, num_leaves=6, learning_rate=0.3, colsample_bytree=0.8, random_state=seed)
        history = np.array(model.fit(X, y).train_mse_history_)
        monotone += bool(np.all(np.diff(history) <= 1e-15))
    split_ok = 0
    for seed in range(50):
        n, d = int(rng.integers(4, 65)), int(rng.integers(1, 5))
        X = rng.integers(0, 4, (n, d)).astype(float)
        y = rng.uniform(size=n)
        _, feature, mask = exhaustive_best_split(X, y - y.mean())
        tree = GBMRegressor(num_trees=1, num_leaves=2, max_depth=None, learning_rate=1.0, reg_lambda=0.0).fit(X, y).trees_[0]
        if feature is None:
            split_ok += tree.n_leaves == 1
        else:
            split_ok += tree.feature[0] == feature and np.array_equal(X[:, feature] <= tree.threshold[0], mask)
    x = np.linspace(-1, 1, 64)[:, None]
    step = np.where(x[:, 0] < 0.1, 0.15, 0.85)
    stump = GBMRegressor(num_trees=1, num_leaves=2, learning_rate=1.0, reg_lambda=0.0).fit(x, step)
    step_mse = float(np.mean((stump.predict(x) - step) ** 2))
    ok = monotone == 10 and split_ok == 50 and step_mse < 1e-6
    record(6, ok, f"monotone {monotone}/10; oracle splits {split_ok}/50; step MSE {step_mse:.2g}")


# 7-10: desk-scale trends


def test_criterion_07_end_to_end(zoo_a, tables_a, searched):
    layer = _holdout(searched("stats_per_layer"), tables_a("stats_per_layer")[1])
    glob = _holdout(searched("stats_global"), tables_a("stats_global")[1])
    ok = layer.r2 >= 0.7 and layer.kendall_tau >= 0.7 and layer.r2 > glob.r2
    record(
        7, ok,
        f"{len(zoo_a.ok_records)} models; per-layer stats R2 {layer.r2:.3f} tau {layer.kendall_tau:.3f}; "
        f"global stats R2 {glob.r2:.3f} (need R2 >= 0.7, tau >= 0.7, per-layer R2 > global R2)",
    )


def test_criterion_08_estimator_ordering(tables_a, searched):
    _, test = tables_a("stats_per_layer")
    gbm = _holdout(searched("stats_per_layer"), test).r2
    linear = _holdout(searched("stats_per_layer", "logit_linear"), test).r2
    record(8, gbm > linear, f"holdout R2 gbm {gbm:.3f} vs logit-linear {linear:.3f}")


def test_criterion_09_transfer(searched, tables_a):
    zoo_b = get_zoo("cnn_b")
    table_b = featurize_zoo(zoo_b, "stats_per_layer")
    tau_ab = evaluate(searched("stats_per_layer"), table_b).kendall_tau

    kind = "stats_layer_subset:final"
    mlp_train, mlp_test = (featurize_zoo(part, kind) for part in split_zoo(get_zoo("mlp_a"), 100, SPLIT_SEED))
    cnn_model = searched(kind)
    mlp_model = random_search(mlp_train, "gbm", BUDGET, search_seed=SEARCH_SEED)[0]
    matrix = transfer_matrix([cnn_model, mlp_model], [tables_a(kind)[1], mlp_test])
    cross = min(matrix[0, 1], matrix[1, 0])
    ok = tau_ab >= 0.3 and cross >= 0.2
    record(
        9, ok,
        f"CNN zoo A->B tau {tau_ab:.3f} (need >= 0.3); CNN<->MLP final-layer tau matrix "
        f"{np.round(matrix, 3).tolist()} (off-diagonal need >= 0.2)",
    )


def test_criterion_10_probe_ordering(zoo_a, split_a, searched):
    model = searched("flat_all")
    _, test = split_a
    mods = [
        ProbeModification("scale", factor=1.0),
        ProbeModification("permute_conv_layers", seed=1),
        ProbeModification("global_permute", mix_bias_weights=True, seed=1),
        ProbeModification("global_permute", seed=1),
    ]
    mads = invariance_probe(model, test, mods, sample_count=100, seed=0)
    conv = mads["permute_conv_layers"]
    ok = mads["scale:1"] == 0.0 and conv < mads["global_permute:mixed"] and conv < mads["global_permute"]
    record(10, ok, "MAD " + ", ".join(f"{k} {v:.4f}" for k, v in mads.items()))


# 11-12: pipeline guarantees


def test_criterion_11_determinism(tmp_path):
    first = run_pipeline(tmp_path / "a", threads=1)
    second = run_pipeline(tmp_path / "b", threads=1)
    differing = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
    record(11, not differing, f"{len(first)} files compared; differing: {differing or 'none'}")


def test_criterion_12_leakage_guard(tmp_path):
    zoo = get_zoo("mlp_a")
    root = tmp_path / "zoo"
    shutil.copytree(zoo.root, root)
    lines = (root / "manifest.jsonl").read_text().splitlines()
    twin = json.loads(lines[3])
    twin["model_id"] = "m900000"
    twin["hyperparams"]["seed"] += 1
    with open(root / "manifest.jsonl", "a") as f:
        f.write(json.dumps(twin) + "\n")
    try:
        load_zoo(root)
    except LeakageError as exc:
        record(12, True, f"rejected: {exc}")
    else:
        record(12, False, "a zoo with seed-only duplicate records was accepted")
    assert os.path.exists(root / "manifest.jsonl")
