"""Random hyperparameter search with k-fold cross-validation."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from sklearn.model_selection import KFold

from ..exceptions import InstabilityError, SearchError, UndefinedScoreError, ValidationError
from ..metrics import mse, r2_score
from ..nn.params import INITIALIZERS
from .serialization import ESTIMATORS

logger = logging.getLogger(__name__)

HIGH_DIM_FEATURES = 1000
GBM_NUM_TREES = (100, 200, 300, 500)


def _log_uniform(rng, lo, hi) -> float:
    return float(min(max(math.exp(rng.uniform(math.log(lo), math.log(hi))), lo), hi))


def sample_gbm(rng: np.random.Generator, n_features: int) -> dict:
    if n_features >= HIGH_DIM_FEATURES:
        colsample = _log_uniform(rng, 1e-2, 1e-1)
    else:
        colsample = float(rng.uniform(0.7, 1.0))
    return {
        "num_trees": int(rng.choice(GBM_NUM_TREES)),
        "num_leaves": int(rng.integers(20, 10_000, endpoint=True)),
        "max_depth": int(rng.integers(5, 15, endpoint=True)),
        "learning_rate": _log_uniform(rng, 1e-2, 1e-1),
        "max_bin": int(rng.choice([63, 127, 255])),
        "min_child_weight": int(rng.integers(1, 5, endpoint=True)),
        "reg_lambda": float(rng.uniform(1e-3, 100)),
        "reg_alpha": float(rng.uniform(1e-6, 5)),
        "subsample": float(rng.integers(1, 10, endpoint=True)) / 10,
        "subsample_freq": 1,
        "colsample_bytree": colsample,
    }


def _sample_sgd_net(rng: np.random.Generator) -> dict:
    return {
        "l2_coeff": _log_uniform(rng, 1e-8, 1e-3),
        "learning_rate": _log_uniform(rng, 1e-3, 0.5),
        "init_variance": _log_uniform(rng, 1e-3, 0.1),
        "init_type": str(rng.choice(INITIALIZERS)),
        "optimizer": str(rng.choice(["adam", "sgd"])),
        "batch_size": int(rng.choice([64, 128, 256, 512])),
    }


def sample_dnn(rng: np.random.Generator, n_features: int) -> dict:
    config = {
        "num_layers": int(rng.integers(3, 9, endpoint=True)),
        "num_units": int(rng.integers(256, 511, endpoint=True)),
        "dropout_rate": float(rng.uniform(0.0, 0.2)),
    }
    config.update(_sample_sgd_net(rng))
    return config


def sample_logit_linear(rng: np.random.Generator, n_features: int) -> dict:
    return _sample_sgd_net(rng)


def sample_random_forest(rng: np.random.Generator, n_features: int) -> dict:
    return {
        "max_features": float(rng.choice([0.33, 0.5, 0.7, 1.0])),
        "min_child_weight": int(rng.integers(1, 5, endpoint=True)),
    }


SAMPLERS: Dict[str, Callable[[np.random.Generator, int], dict]] = {
    "gbm": sample_gbm,
    "dnn": sample_dnn,
    "logit_linear": sample_logit_linear,
    "random_forest": sample_random_forest,
}


def sample_configs(kind: str, budget: int, n_features: int, search_seed: int) -> List[dict]:
    """``budget`` distinct configurations, each with its own random_state."""
    if kind not in SAMPLERS:
        raise ValidationError(f"unknown estimator kind {kind!r}; expected one of {sorted(SAMPLERS)}")
    rng = np.random.default_rng(np.random.SeedSequence(int(search_seed), spawn_key=(17,)))
    seen, configs = set(), []
    attempts = 0
    while len(configs) < budget:
        attempts += 1
        if attempts > 100 * budget:
            raise SearchError(f"could not draw {budget} distinct {kind} configurations")
        config = SAMPLERS[kind](rng, n_features)
        key = json.dumps(config, sort_keys=True)
        if key in seen:
            continue
        seen.add(key)
        config["random_state"] = int(rng.integers(2**31))
        configs.append(config)
    return configs


def _safe_r2(y, pred) -> Optional[float]:
    try:
        return r2_score(y, pred)
    except UndefinedScoreError:
        return None


def _evaluate_config(job) -> dict:
    kind, config, X, y, splits, extra = job
    trial = {"config": config, "fold_mse": [], "fold_r2": [], "status": "ok"}
    try:
        for train_idx, valid_idx in splits:
            model = ESTIMATORS[kind](**extra, **config).fit(X[train_idx], y[train_idx])
            pred = model.predict(X[valid_idx])
            if not np.isfinite(pred).all():
                raise InstabilityError("non-finite validation predictions")
            trial["fold_mse"].append(mse(y[valid_idx], pred))
            trial["fold_r2"].append(_safe_r2(y[valid_idx], pred))
    except (InstabilityError, FloatingPointError) as exc:
        trial.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return trial
    trial["mean_mse"] = float(np.mean(trial["fold_mse"]))
    trial["std_mse"] = float(np.std(trial["fold_mse"]))
    r2s = [v for v in trial["fold_r2"] if v is not None]
    trial["mean_r2"] = float(np.mean(r2s)) if r2s else None
    trial["std_r2"] = float(np.std(r2s)) if r2s else None
    return trial


def random_search(
    table,
    kind: str,
    budget: int,
    folds: int = 3,
    search_seed: int = 0,
    threads: int = 1,
    extra_params: Optional[dict] = None,
) -> Tuple[object, dict]:
    """Pick the configuration with the lowest mean CV MSE, refit it on the
    whole table, and return ``(model, report)``.

    ``extra_params`` are fixed estimator arguments added to every sampled
    configuration (e.g. ``{"epochs": 50}`` for the neural estimators). A
    fixed argument that is also a search dimension replaces the sampled
    value, so the draws for the remaining dimensions are unchanged.
    """
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if folds < 2 or len(table) < folds:
        raise ValidationError(f"need folds >= 2 and at least {folds} rows")
    extra = dict(extra_params or {})
    configs = [
        {k: v for k, v in config.items() if k not in extra}
        for config in sample_configs(kind, budget, table.n_features, search_seed)
    ]
    kfold = KFold(n_splits=folds, shuffle=True, random_state=int(search_seed) % 2**32)
    splits = list(kfold.split(table.X))
    jobs = [(kind, config, table.X, table.y, splits, extra) for config in configs]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(_evaluate_config, jobs))
    else:
        trials = [_evaluate_config(job) for job in jobs]
    for i, trial in enumerate(trials):
        trial["index"] = i
    ok = [t for t in trials if t["status"] == "ok"]
    if not ok:
        log = "; ".join(f"#{t['index']}: {t.get('error')}" for t in trials)
        raise SearchError(f"all {len(trials)} {kind} configurations failed: {log}")
    best = min(ok, key=lambda t: (t["mean_mse"], t["index"]))
    model = ESTIMATORS[kind](**extra, **best["config"]).fit_table(table)
    report = {
        "estimator": kind,
        "feature_kind": table.kind,
        "budget": budget,
        "folds": folds,
        "search_seed": search_seed,
        "n_rows": len(table),
        "n_features": table.n_features,
        "fixed_params": extra,
        "best_index": best["index"],
        "best_config": best["config"],
        "cv_mse_mean": best["mean_mse"],
        "cv_mse_std": best["std_mse"],
        "cv_r2_mean": best["mean_r2"],
        "cv_r2_std": best["std_r2"],
        "n_failed": len(trials) - len(ok),
        "trials": trials,
    }
    logger.info("%s search: best #%d, CV MSE %.5g", kind, best["index"], best["mean_mse"])
    return model, report
