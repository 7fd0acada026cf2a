"""Feature tables: one row per zoo model, target = test accuracy.

On disk a table is a CSV (``model_id,<features...>,target``, reals with 9
significant digits) plus a ``<file>.meta.json`` sidecar holding the
feature kind, conventions and provenance. Values are rounded to 9
significant digits when the table is built, so writing and re-reading a
table is lossless.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..exceptions import CheckpointError, ShapeError, ValidationError, VersionMismatchError
from ..zoo.collection import ZooCollection
from .extract import extract, parse_kind
from .stats import PERCENTILE_METHOD, VARIANCE_CONVENTION

TABLE_FORMAT_VERSION = 1
SIG_DIGITS = 9


def fmt(value: float) -> str:
    return format(float(value), f".{SIG_DIGITS}g")


def round_sig(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.array([float(fmt(v)) for v in values.ravel()]).reshape(values.shape)


@dataclass
class FeatureTable:
    model_ids: List[str]
    feature_names: List[str]
    X: np.ndarray
    y: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        n = len(self.model_ids)
        if self.X.shape != (n, len(self.feature_names)) or self.y.shape != (n,):
            raise ShapeError(
                f"table shapes disagree: {n} ids, X {self.X.shape}, y {self.y.shape}, "
                f"{len(self.feature_names)} names"
            )
        if not np.isfinite(self.X).all():
            raise ValidationError("feature tables may not contain NaN or infinite values")
        if n and not (np.isfinite(self.y).all() and self.y.min() >= 0 and self.y.max() <= 1):
            raise ValidationError("targets must be accuracies in [0, 1]")

    def __len__(self) -> int:
        return len(self.model_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def rows(self, index) -> "FeatureTable":
        index = np.asarray(index)
        return FeatureTable(
            [self.model_ids[i] for i in np.arange(len(self))[index]],
            list(self.feature_names), self.X[index], self.y[index], self.kind, dict(self.meta),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model_id", *self.feature_names, "target"])
        for mid, row, target in zip(self.model_ids, self.X, self.y):
            writer.writerow([mid, *(fmt(v) for v in row), fmt(target)])
        return buf.getvalue()

    def write(self, path) -> None:
        path = os.fspath(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv())
        meta = dict(self.meta)
        meta.update(
            format_version=TABLE_FORMAT_VERSION,
            kind=self.kind,
            n_rows=len(self),
            n_features=self.n_features,
            percentile_method=PERCENTILE_METHOD,
            variance=VARIANCE_CONVENTION,
            significant_digits=SIG_DIGITS,
        )
        with open(meta_path(path), "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def meta_path(path) -> str:
    return os.fspath(path) + ".meta.json"


def read_table(path) -> FeatureTable:
    path = os.fspath(path)
    meta = {}
    if os.path.exists(meta_path(path)):
        with open(meta_path(path), encoding="utf-8") as f:
            meta = json.load(f)
        if meta.get("format_version") != TABLE_FORMAT_VERSION:
            raise VersionMismatchError(
                f"{path}: feature table format {meta.get('format_version')}, expected {TABLE_FORMAT_VERSION}"
            )
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty feature table") from None
        if len(header) < 2 or header[0] != "model_id" or header[-1] != "target":
            raise ValidationError(f"{path}: header must be model_id,<features...>,target")
        ids, rows, targets = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric feature value") from None
            if any(math.isnan(v) for v in values):
                raise ValidationError(f"{path}:{lineno}: missing (NaN) feature values are not supported")
            ids.append(row[0])
            rows.append(values[:-1])
            targets.append(values[-1])
    names = header[1:-1]
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(names))
    kind = meta.get("kind", "unknown")
    return FeatureTable(ids, names, X, np.array(targets, dtype=np.float64), kind, meta)


def _row(job):
    zoo, record, kind = job
    try:
        params = zoo.load_params(record) if parse_kind(kind).needs_params else None
    except CheckpointError as exc:
        raise CheckpointError(f"model {record.model_id}: {exc}") from None
    fv = extract(params, kind, record.hyperparams)
    return fv.names, fv.values


def featurize_zoo(
    zoo: ZooCollection,
    kind,
    threads: int = 1,
    records: Optional[Sequence] = None,
) -> FeatureTable:
    """Feature table for every record of ``zoo`` (all must be ok), in
    manifest order."""
    kind = str(parse_kind(kind))
    records = list(zoo.records if records is None else records)
    bad = [r.model_id for r in records if not r.ok]
    if bad:
        raise ValidationError(f"cannot featurize discarded models: {', '.join(bad[:5])}")
    if not records:
        raise ValidationError("no records to featurize")
    jobs = [(zoo, r, kind) for r in records]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_row, jobs, chunksize=8))
    else:
        results = [_row(job) for job in jobs]
    names = results[0][0]
    for record, (row_names, _) in zip(records, results):
        if row_names != names:
            raise ShapeError(f"model {record.model_id}: feature layout differs from the first model")
    X = round_sig(np.vstack([values for _, values in results]))
    y = round_sig(np.array([r.test_accuracy for r in records]))
    meta = {
        "dataset": zoo.dataset,
        "architecture": zoo.architecture.name,
    }
    return FeatureTable([r.model_id for r in records], list(names), X, y, kind, meta)
