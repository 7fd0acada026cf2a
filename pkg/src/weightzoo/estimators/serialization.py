"""JSON model files."""
from __future__ import annotations

import json
import os
from typing import Optional

from ..exceptions import ValidationError, VersionMismatchError
from .neural import DNNRegressor, LogitLinearRegressor
from .trees import GBMRegressor, RandomForestRegressor

MODEL_FORMAT_VERSION = 1
ESTIMATORS = {
    cls.kind: cls for cls in (GBMRegressor, RandomForestRegressor, LogitLinearRegressor, DNNRegressor)
}


def model_to_dict(model, metadata: Optional[dict] = None) -> dict:
    doc = {
        "format": "weightzoo-model",
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "config": model.get_params(),
        "feature_kind": getattr(model, "feature_kind_", None),
        "feature_names": getattr(model, "feature_names_", None),
        "n_features": int(model.n_features_in_),
        "state": model._state(),
    }
    if metadata:
        doc["metadata"] = metadata
    return doc


def model_from_dict(doc: dict):
    if doc.get("format") != "weightzoo-model":
        raise ValidationError("not a weightzoo model document")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format {doc.get('format_version')}, expected {MODEL_FORMAT_VERSION}"
        )
    try:
        cls = ESTIMATORS[doc["kind"]]
    except KeyError:
        raise ValidationError(f"unknown estimator kind {doc.get('kind')!r}") from None
    model = cls(**doc["config"])
    model.n_features_in_ = int(doc["n_features"])
    if doc.get("feature_names") is not None:
        model.feature_names_ = list(doc["feature_names"])
    if doc.get("feature_kind") is not None:
        model.feature_kind_ = doc["feature_kind"]
    model._set_state(doc["state"])
    model.metadata_ = doc.get("metadata", {})
    return model


def save_model(model, path, metadata: Optional[dict] = None) -> None:
    text = json.dumps(model_to_dict(model, metadata), sort_keys=True, allow_nan=False)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")
    os.replace(tmp, path)


def load_model(path):
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except ValueError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)
