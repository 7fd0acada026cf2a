"""Zoo directories: generation, manifest I/O, validation and splitting.

A zoo directory holds ``zoo.json`` (dataset, architecture, generation
config), ``manifest.jsonl`` (one record per line, canonical key order,
sorted by model_id) and ``checkpoints/<model_id>.wzoo`` for every ok model.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..data import Dataset
from ..exceptions import CheckpointError, LeakageError, ValidationError, VersionMismatchError
from ..nn.params import ParameterSet
from ..nn.spec import NetworkSpec
from .checkpoint import dumps_canonical, read_checkpoint, write_checkpoint
from .hyperparams import sample_hyperparams
from .train import DEFAULT_BATCH_SIZE, STATUS_OK, ZooRecord, network_for, train_one

logger = logging.getLogger(__name__)

ZOO_FORMAT_VERSION = 1
MANIFEST = "manifest.jsonl"
METADATA = "zoo.json"
CHECKPOINT_DIR = "checkpoints"


def model_id_for(k: int) -> str:
    return f"m{k:06d}"


@dataclass
class ZooCollection:
    records: List[ZooRecord]
    dataset: str
    architecture: NetworkSpec
    generation: dict = field(default_factory=dict)
    root: Optional[str] = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def ok_records(self) -> List[ZooRecord]:
        return [r for r in self.records if r.ok]

    @property
    def model_ids(self) -> List[str]:
        return [r.model_id for r in self.records]

    def subset(self, records: Iterable[ZooRecord]) -> "ZooCollection":
        return replace(self, records=list(records))

    def metadata(self) -> dict:
        return {
            "format_version": ZOO_FORMAT_VERSION,
            "dataset": self.dataset,
            "architecture": self.architecture.to_dict(),
            "generation": self.generation,
        }

    def checkpoint_file(self, record: ZooRecord) -> str:
        if record.checkpoint_path is None:
            raise CheckpointError(f"{record.model_id}: record has no checkpoint")
        if self.root is None:
            return record.checkpoint_path
        return os.path.join(self.root, record.checkpoint_path)

    def load_params(self, record: ZooRecord) -> ParameterSet:
        if record.params is not None:
            return record.params
        try:
            _, params = read_checkpoint(self.checkpoint_file(record))
        except CheckpointError as exc:
            raise CheckpointError(f"model {record.model_id}: {exc}") from None
        return params

    def test_accuracies(self) -> np.ndarray:
        return np.array([r.test_accuracy for r in self.records], dtype=np.float64)

    def validate(self) -> None:
        """Unique ids, finite metrics, and one seed per configuration."""
        seen_ids = set()
        configs: Dict[tuple, str] = {}
        for record in self.records:
            if record.model_id in seen_ids:
                raise ValidationError(f"duplicate model_id {record.model_id}")
            seen_ids.add(record.model_id)
            record.check()
            key = record.hyperparams.without_seed()
            if key in configs:
                raise LeakageError(
                    f"models {configs[key]} and {record.model_id} share every hyperparameter "
                    "except the seed"
                )
            configs[key] = record.model_id

    def write_manifest(self, path: Optional[str] = None) -> str:
        path = path or os.path.join(self.root, MANIFEST)
        lines = [dumps_canonical(r.to_dict()) for r in sorted(self.records, key=lambda r: r.model_id)]
        _atomic_write(path, "".join(line + "\n" for line in lines))
        return path


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def read_manifest(path) -> List[ZooRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(ZooRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError):
            if i == len(lines) - 1:
                # torn final line from an interrupted run
                logger.warning("ignoring incomplete last manifest line in %s", path)
                continue
            raise ValidationError(f"{path}: malformed manifest line {i + 1}") from None
    return records


def load_zoo(root, validate: bool = True) -> ZooCollection:
    root = os.fspath(root)
    meta_path = os.path.join(root, METADATA)
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"{root} is not a zoo directory (no {METADATA})")
    with open(meta_path, encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("format_version") != ZOO_FORMAT_VERSION:
        raise VersionMismatchError(
            f"{meta_path}: zoo format {meta.get('format_version')}, expected {ZOO_FORMAT_VERSION}"
        )
    manifest = os.path.join(root, MANIFEST)
    records = read_manifest(manifest) if os.path.exists(manifest) else []
    records.sort(key=lambda r: r.model_id)
    zoo = ZooCollection(
        records=records,
        dataset=meta["dataset"]["name"] if isinstance(meta["dataset"], dict) else meta["dataset"],
        architecture=NetworkSpec.from_dict(meta["architecture"]),
        generation=meta["generation"],
        root=root,
    )
    zoo.dataset_info = meta["dataset"]
    if validate:
        zoo.validate()
    return zoo


def _train_job(args) -> Tuple[int, ZooRecord]:
    spec, hp, train, test, epochs, batch_size, k = args
    return k, train_one(spec, hp, train, test, epochs, batch_size, model_id_for(k))


def _checkpoint_header(spec: NetworkSpec, record: ZooRecord, dataset: str) -> dict:
    return {
        "format": "weightzoo-checkpoint",
        "model_id": record.model_id,
        "dataset": dataset,
        "architecture": network_for(spec, record.hyperparams).to_dict(),
        "hyperparams": record.hyperparams.to_dict(),
        "metrics": record.metrics(),
        "seed": record.hyperparams.seed,
        "epochs_run": record.epochs_run,
    }


def build_zoo(
    spec: NetworkSpec,
    train: Dataset,
    test: Dataset,
    count: int,
    sweep_seed: int,
    epochs: int,
    out_dir,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
    run_config: Optional[dict] = None,
) -> ZooCollection:
    """Sample ``count`` configurations, train each, and write the zoo.

    Re-running on an existing directory skips model_ids already present in
    the manifest (ok records must still have their checkpoint).
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(os.path.join(out_dir, CHECKPOINT_DIR), exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create zoo directory {out_dir}: {exc.strerror}") from None
    if not os.access(out_dir, os.W_OK):
        raise ValidationError(f"zoo directory {out_dir} is not writable")

    generation = {
        "epochs": epochs,
        "batch_size": batch_size,
        "sweep_seed": sweep_seed,
        "count": count,
        "train_size": len(train),
        "test_size": len(test),
    }
    if run_config:
        generation["run_config"] = run_config
    dataset_info = {
        "name": train.name,
        "image_shape": list(train.image_shape),
        "num_classes": train.num_classes,
    }
    zoo = ZooCollection([], train.name, spec, generation, root=out_dir)
    meta = zoo.metadata()
    meta["dataset"] = dataset_info
    meta_path = os.path.join(out_dir, METADATA)
    manifest_path = os.path.join(out_dir, MANIFEST)
    done: Dict[str, ZooRecord] = {}
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as f:
            old = json.load(f)
        if _comparable(old) != _comparable(meta):
            raise ValidationError(f"{out_dir} already holds a zoo generated with a different configuration")
        if os.path.exists(manifest_path):
            for record in read_manifest(manifest_path):
                if record.ok and not os.path.exists(os.path.join(out_dir, record.checkpoint_path or "")):
                    continue
                done[record.model_id] = record
    _atomic_write(meta_path, json.dumps(meta, sort_keys=True, indent=2) + "\n")

    todo = [k for k in range(count) if model_id_for(k) not in done]
    jobs = [(spec, sample_hyperparams(sweep_seed, k), train, test, epochs, batch_size, k) for k in todo]
    if todo:
        logger.info("training %d of %d models into %s", len(todo), count, out_dir)

    with open(manifest_path, "a", encoding="utf-8", newline="\n") as log:
        def finish(record: ZooRecord) -> None:
            if record.ok:
                record.checkpoint_path = f"{CHECKPOINT_DIR}/{record.model_id}.wzoo"
                write_checkpoint(
                    os.path.join(out_dir, record.checkpoint_path),
                    record.params,
                    _checkpoint_header(spec, record, train.name),
                )
            record.params = None
            done[record.model_id] = record
            log.write(dumps_canonical(record.to_dict()) + "\n")
            log.flush()

        if threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                for _, record in pool.map(_train_job, jobs, chunksize=1):
                    finish(record)
        else:
            for job in jobs:
                finish(_train_job(job)[1])

    wanted = {model_id_for(k) for k in range(count)}
    zoo.records = sorted((r for r in done.values() if r.model_id in wanted), key=lambda r: r.model_id)
    zoo.write_manifest(manifest_path)
    zoo.dataset_info = dataset_info
    zoo.validate()
    return zoo


def _comparable(meta: dict) -> dict:
    meta = json.loads(json.dumps(meta))
    meta.get("generation", {}).pop("count", None)
    meta.get("generation", {}).pop("run_config", None)
    return meta


def split_zoo(zoo: ZooCollection, train_count: int, split_seed: int) -> Tuple[ZooCollection, ZooCollection]:
    """Random disjoint train/test partition of the ok records.

    Both parts keep manifest (model_id) order.
    """
    ok = sorted(zoo.ok_records, key=lambda r: r.model_id)
    if not 0 < train_count < len(ok):
        raise ValidationError(f"train_count={train_count} must lie in (0, {len(ok)}) for {len(ok)} ok records")
    rng = np.random.default_rng(np.random.SeedSequence(int(split_seed), spawn_key=(1,)))
    chosen = np.zeros(len(ok), dtype=bool)
    chosen[rng.permutation(len(ok))[:train_count]] = True
    return (
        zoo.subset(r for r, c in zip(ok, chosen) if c),
        zoo.subset(r for r, c in zip(ok, chosen) if not c),
    )
