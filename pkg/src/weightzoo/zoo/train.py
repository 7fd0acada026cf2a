"""Training a single zoo member."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from ..data import Dataset, subsample
from ..exceptions import InstabilityError, ValidationError
from ..nn.engine import evaluate_split, loss_and_grads
from ..nn.optim import init_state, optimizer_step
from ..nn.params import ParameterSet, init_params
from ..nn.spec import NetworkSpec
from .hyperparams import HyperParams, seed_stream

STATUS_OK = "ok"
STATUS_DISCARDED = "discarded_instability"
DEFAULT_BATCH_SIZE = 128


@dataclass
class ZooRecord:
    model_id: str
    hyperparams: HyperParams
    train_accuracy: Optional[float]
    test_accuracy: Optional[float]
    train_loss: Optional[float]
    test_loss: Optional[float]
    epochs_run: int
    status: str
    checkpoint_path: Optional[str] = None
    params: Optional[ParameterSet] = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def metrics(self) -> dict:
        return {
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "train_loss": self.train_loss,
            "test_loss": self.test_loss,
        }

    def to_dict(self) -> dict:
        d = {
            "model_id": self.model_id,
            "checkpoint_path": self.checkpoint_path,
            "hyperparams": self.hyperparams.to_dict(),
            "epochs_run": self.epochs_run,
            "status": self.status,
        }
        d.update(self.metrics())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ZooRecord":
        return cls(
            model_id=d["model_id"],
            hyperparams=HyperParams.from_dict(d["hyperparams"]),
            train_accuracy=d["train_accuracy"],
            test_accuracy=d["test_accuracy"],
            train_loss=d["train_loss"],
            test_loss=d["test_loss"],
            epochs_run=int(d["epochs_run"]),
            status=d["status"],
            checkpoint_path=d.get("checkpoint_path"),
        )

    def check(self) -> None:
        if self.status not in (STATUS_OK, STATUS_DISCARDED):
            raise ValidationError(f"{self.model_id}: unknown status {self.status!r}")
        if self.status == STATUS_OK:
            values = list(self.metrics().values())
            if any(v is None or not math.isfinite(v) for v in values):
                raise ValidationError(f"{self.model_id}: ok record with non-finite metrics")
            if not (0.0 <= self.train_accuracy <= 1.0 and 0.0 <= self.test_accuracy <= 1.0):
                raise ValidationError(f"{self.model_id}: accuracy outside [0, 1]")


def network_for(spec: NetworkSpec, hp: HyperParams) -> NetworkSpec:
    return spec.with_activation(hp.activation).with_dropout(hp.dropout_rate)


def train_one(
    spec: NetworkSpec,
    hp: HyperParams,
    train: Dataset,
    test: Dataset,
    epochs: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    model_id: str = "model",
) -> ZooRecord:
    """Train for exactly ``epochs`` epochs and report final-epoch metrics.

    Any non-finite loss, gradient or update aborts training; the returned
    record then has status ``discarded_instability`` and no parameters.
    """
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    net = network_for(spec, hp)
    data = subsample(train, hp.train_fraction, int(seed_stream(hp.seed, "subsample").integers(2**63)))
    init_seed = int(seed_stream(hp.seed, "init").integers(2**63))
    params = init_params(net, hp.init_type, hp.init_variance, init_seed)
    state = init_state(hp.optimizer, hp.learning_rate, params)
    shuffle_rng = seed_stream(hp.seed, "shuffle")
    dropout_rng = seed_stream(hp.seed, "dropout")
    epochs_run = 0
    with threadpool_limits(1):
        try:
            for _ in range(epochs):
                order = shuffle_rng.permutation(len(data))
                for start in range(0, len(order), batch_size):
                    idx = order[start:start + batch_size]
                    _, grads = loss_and_grads(
                        net, params, data.images[idx], data.labels[idx],
                        hp.l2_coeff, dropout_seed=int(dropout_rng.integers(2**63)),
                    )
                    params = optimizer_step(state, params, grads)
                epochs_run += 1
            train_acc, train_loss = evaluate_split(net, params, data)
            test_acc, test_loss = evaluate_split(net, params, test)
            if not all(math.isfinite(v) for v in (train_loss, test_loss)):
                raise InstabilityError("non-finite final loss")
        except InstabilityError:
            return ZooRecord(model_id, hp, None, None, None, None, epochs_run, STATUS_DISCARDED)
    return ZooRecord(
        model_id, hp, train_acc, test_acc, train_loss, test_loss, epochs_run, STATUS_OK, params=params
    )
