"""Randomized training configurations for zoo members."""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..data import TRAIN_FRACTIONS
from ..exceptions import ValidationError
from ..nn.optim import OPTIMIZERS
from ..nn.params import INITIALIZERS

ACTIVATIONS = ("relu", "tanh")

LEARNING_RATE_RANGE = (5e-4, 5e-2)
L2_RANGE = (1e-8, 1e-2)
DROPOUT_RANGE = (0.0, 0.7)
INIT_VARIANCE_RANGE = (1e-3, 0.5)


@dataclass(frozen=True)
class HyperParams:
    optimizer: str
    learning_rate: float
    l2_coeff: float
    dropout_rate: float
    init_variance: float
    init_type: str
    activation: str
    train_fraction: float
    seed: int

    def __post_init__(self):
        _check_choice("optimizer", self.optimizer, OPTIMIZERS)
        _check_choice("init_type", self.init_type, INITIALIZERS)
        _check_choice("activation", self.activation, ACTIVATIONS)
        _check_choice("train_fraction", self.train_fraction, TRAIN_FRACTIONS)
        _check_range("learning_rate", self.learning_rate, LEARNING_RATE_RANGE)
        _check_range("l2_coeff", self.l2_coeff, L2_RANGE)
        _check_range("dropout_rate", self.dropout_rate, DROPOUT_RANGE)
        _check_range("init_variance", self.init_variance, INIT_VARIANCE_RANGE)
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def without_seed(self) -> tuple:
        """Identity of the configuration for the one-seed-per-config rule."""
        d = self.to_dict()
        d.pop("seed")
        return tuple(sorted(d.items()))


def _check_choice(name, value, allowed):
    if value not in allowed:
        raise ValidationError(f"{name}={value!r} not in {allowed}")


def _check_range(name, value, bounds):
    lo, hi = bounds
    if not (math.isfinite(value) and lo <= value <= hi):
        raise ValidationError(f"{name}={value!r} outside [{lo}, {hi}]")


def model_seed(sweep_seed: int, k: int) -> int:
    """64-bit hash of (sweep_seed, k)."""
    digest = hashlib.blake2b(f"weightzoo:{int(sweep_seed)}:{int(k)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for one purpose (init, dropout, ...) of a model."""
    tag = int.from_bytes(hashlib.blake2b(purpose.encode(), digest_size=4).digest(), "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, tag]))


def _log_uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    return float(min(max(math.exp(rng.uniform(math.log(lo), math.log(hi))), lo), hi))


def sample_hyperparams(sweep_seed: int, k: int) -> HyperParams:
    """The ``k``-th configuration of the sweep seeded by ``sweep_seed``."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence(int(sweep_seed), spawn_key=(int(k),)))
    return HyperParams(
        optimizer=OPTIMIZERS[rng.integers(len(OPTIMIZERS))],
        learning_rate=_log_uniform(rng, LEARNING_RATE_RANGE),
        l2_coeff=_log_uniform(rng, L2_RANGE),
        dropout_rate=float(rng.uniform(*DROPOUT_RANGE)),
        init_variance=_log_uniform(rng, INIT_VARIANCE_RANGE),
        init_type=INITIALIZERS[rng.integers(len(INITIALIZERS))],
        activation=ACTIVATIONS[rng.integers(len(ACTIVATIONS))],
        train_fraction=TRAIN_FRACTIONS[rng.integers(len(TRAIN_FRACTIONS))],
        seed=model_seed(sweep_seed, k),
    )
