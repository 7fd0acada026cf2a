"""Holdout evaluation and cross-collection transfer."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ShapeError, ValidationError
from .features.table import fmt
from .metrics import kendall_tau, mad, mse, r2_score

REPORT_FORMAT_VERSION = 1


@dataclass
class EvalReport:
    mse: float
    mad: float
    r2: float
    kendall_tau: float
    n: int
    scatter: List[Tuple[float, float]]
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n != len(self.scatter):
            raise ValidationError(f"report n={self.n} but {len(self.scatter)} scatter points")
        if self.r2 > 1 or not -1 <= self.kendall_tau <= 1:
            raise ValidationError("r2 must be <= 1 and kendall_tau within [-1, 1]")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["scatter"] = [list(p) for p in self.scatter]
        doc["format_version"] = REPORT_FORMAT_VERSION
        return doc

    def scatter_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true", "predicted"])
        writer.writerows((fmt(t), fmt(p)) for t, p in self.scatter)
        return buf.getvalue()

    def write(self, path, scatter_path: Optional[str] = None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n")
        if scatter_path is None:
            scatter_path = os.path.splitext(os.fspath(path))[0] + ".scatter.csv"
        with open(scatter_path, "w", encoding="utf-8", newline="") as f:
            f.write(self.scatter_csv())


def evaluate(model, table, provenance: Optional[dict] = None) -> EvalReport:
    """All four metrics of ``model`` on a feature table."""
    pred = model.predict_table(table)
    y = table.y
    info = {
        "feature_kind": table.kind,
        "estimator": getattr(model, "kind", type(model).__name__),
        "model_ids": list(table.model_ids),
    }
    info.update(provenance or {})
    return EvalReport(
        mse=mse(y, pred),
        mad=mad(y, pred),
        r2=r2_score(y, pred),
        kendall_tau=kendall_tau(y, pred),
        n=len(y),
        scatter=[(float(t), float(p)) for t, p in zip(y, pred)],
        provenance=info,
    )


def transfer_matrix(models: Sequence, tables: Sequence) -> np.ndarray:
    """``out[i, j]`` is the Kendall tau of model ``i`` on test table ``j``.

    Every model must have been trained on the feature layout of every
    table; across architectures that holds for the layer-count independent
    statistics kinds.
    """
    if not models or not tables:
        raise ValidationError("transfer needs at least one model and one table")
    kinds = {getattr(m, "feature_kind_", None) for m in models} | {t.kind for t in tables}
    if len(kinds) != 1:
        raise ShapeError(f"models and tables mix feature kinds: {sorted(map(str, kinds))}")
    out = np.empty((len(models), len(tables)))
    for i, model in enumerate(models):
        for j, table in enumerate(tables):
            out[i, j] = evaluate(model, table).kendall_tau
    return out
