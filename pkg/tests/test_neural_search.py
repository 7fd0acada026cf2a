import numpy as np
import pytest

from weightzoo.estimators import DNNRegressor, LogitLinearRegressor, random_search, sample_configs
from weightzoo.estimators.neural import sigmoid
from weightzoo.exceptions import InstabilityError, SearchError, ValidationError
from weightzoo.features.table import FeatureTable


def _table(X, y, kind="synthetic"):
    n, d = X.shape
    return FeatureTable([f"m{i:06d}" for i in range(n)], [f"x{j}" for j in range(d)], X, y, kind)


def _separable(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = np.where(X[:, 1] > 0, 0.9, 0.1)
    return X, y


def _logistic(n=90, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    return X, sigmoid(2.0 * X[:, 1] - X[:, 0])


def test_zero_theta_predicts_half():
    X, y = _separable()
    model = LogitLinearRegressor(epochs=0).fit(X, y)
    np.testing.assert_array_equal(model.predict(X), 0.5)
    initial_mse = np.mean((y - 0.5) ** 2)
    assert np.mean((model.predict(X) - y) ** 2) == pytest.approx(initial_mse)


def test_heavy_l2_pins_theta_near_zero():
    X, y = _logistic()
    common = dict(learning_rate=1e-3, epochs=300, optimizer="sgd", batch_size=128)
    free = LogitLinearRegressor(l2_coeff=0.0, **common).fit(X, y)
    pinned = LogitLinearRegressor(l2_coeff=400.0, **common).fit(X, y)
    assert np.abs(pinned.coef_).max() < 0.01 * np.abs(free.coef_).max()


def test_logit_linear_learns_separable_targets():
    X, y = _logistic()
    model, report = random_search(_table(X, y), "logit_linear", budget=6, search_seed=1, extra_params={"epochs": 150})
    assert np.mean((model.predict(X) - y) ** 2) < 0.01
    assert report["n_failed"] < 6


def test_dnn_fits_step_function():
    x = np.linspace(-1, 1, 80)[:, None]
    y = np.where(x[:, 0] < 0, 0.2, 0.8)
    model = DNNRegressor(num_layers=2, num_units=32, learning_rate=1e-2, epochs=150, init_variance=1.0).fit(x, y)
    pred = model.predict(x)
    assert np.mean((pred - y) ** 2) < 0.01
    assert pred.min() > 0 and pred.max() < 1


def test_dnn_is_deterministic():
    X, y = _separable(40)
    a = DNNRegressor(num_layers=3, num_units=16, epochs=5, dropout_rate=0.2, random_state=3).fit(X, y)
    b = DNNRegressor(num_layers=3, num_units=16, epochs=5, dropout_rate=0.2, random_state=3).fit(X, y)
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


def test_logit_linear_exposes_only_its_params():
    assert "num_layers" not in LogitLinearRegressor().get_params()


def test_config_spaces():
    for config in sample_configs("gbm", 200, 56, search_seed=0):
        assert 20 <= config["num_leaves"] <= 10_000 and 5 <= config["max_depth"] <= 15
        assert 1e-2 <= config["learning_rate"] <= 1e-1 and config["max_bin"] in (63, 127, 255)
        assert 0.7 <= config["colsample_bytree"] <= 1.0
    for config in sample_configs("gbm", 50, 4970, search_seed=0):
        assert 1e-2 <= config["colsample_bytree"] <= 1e-1
    for config in sample_configs("dnn", 200, 56, search_seed=0):
        assert 3 <= config["num_layers"] <= 9 and 256 <= config["num_units"] <= 511
        assert config["dropout_rate"] <= 0.2 and config["batch_size"] in (64, 128, 256, 512)
        assert 1e-3 <= config["learning_rate"] <= 0.5 and config["optimizer"] in ("sgd", "adam")
    configs = sample_configs("logit_linear", 30, 56, search_seed=4)
    assert len({tuple(sorted(c.items())) for c in configs}) == 30
    assert configs == sample_configs("logit_linear", 30, 56, search_seed=4)
    with pytest.raises(ValidationError):
        sample_configs("svm", 1, 3, 0)


def test_search_picks_lowest_cv_mse():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 4))
    y = 1 / (1 + np.exp(-X[:, 0] - X[:, 1] ** 2))
    table = _table(X, y)
    model, report = random_search(table, "gbm", budget=6, search_seed=3)
    best = report["cv_mse_mean"]
    assert all(best <= t["mean_mse"] for t in report["trials"] if t["status"] == "ok")
    assert report["best_config"] == report["trials"][report["best_index"]]["config"]
    again, report2 = random_search(table, "gbm", budget=6, search_seed=3)
    assert report2 == report
    np.testing.assert_array_equal(again.predict(X), model.predict(X))


def test_budget_one_refits_that_config():
    X, y = _separable()
    model, report = random_search(_table(X, y), "random_forest", budget=1, search_seed=0)
    for key, value in report["trials"][0]["config"].items():
        assert model.get_params()[key] == value


def test_all_failing_search_raises(monkeypatch):
    def diverge(self, X, y):
        raise InstabilityError("forced")

    monkeypatch.setattr(DNNRegressor, "_fit", diverge)
    X, y = _separable()
    with pytest.raises(SearchError):
        random_search(_table(X, y), "logit_linear", budget=2, search_seed=0, extra_params={"epochs": 3})
