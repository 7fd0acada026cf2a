"""Generating, storing and splitting collections of trained networks."""
from .checkpoint import read_checkpoint, write_checkpoint
from .collection import ZooCollection, build_zoo, load_zoo, split_zoo
from .hyperparams import HyperParams, model_seed, sample_hyperparams
from .train import STATUS_DISCARDED, STATUS_OK, ZooRecord, train_one

__all__ = [
    "HyperParams",
    "STATUS_DISCARDED",
    "STATUS_OK",
    "ZooCollection",
    "ZooRecord",
    "build_zoo",
    "load_zoo",
    "model_seed",
    "read_checkpoint",
    "sample_hyperparams",
    "split_zoo",
    "train_one",
    "write_checkpoint",
]
