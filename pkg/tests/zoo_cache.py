"""Desk-scale zoos shared by the acceptance tests.

Builds are resumable, so a warm cache directory makes reruns cheap. Set
``WEIGHTZOO_TEST_CACHE`` to relocate the cache (default: ``tests/.zoo-cache``).
"""
from __future__ import annotations

import os
import sys

from weightzoo.data import SyntheticSpec, gen_synthetic
from weightzoo.nn import mlp, base_cnn
from weightzoo.zoo import build_zoo

CACHE = os.environ.get("WEIGHTZOO_TEST_CACHE", os.path.join(os.path.dirname(__file__), ".zoo-cache"))
IMAGE_SHAPE = (16, 16, 1)
EPOCHS = 10

ZOOS = {
    # name: (pattern seed, architecture, model count, sweep seed)
    "cnn_a": (0, "cnn", 300, 1),
    "cnn_b": (1, "cnn", 150, 2),
    "mlp_a": (0, "mlp", 150, 3),
}


def architecture(name: str):
    return base_cnn(IMAGE_SHAPE) if name == "cnn" else mlp(IMAGE_SHAPE, hidden=(16, 16, 16))


def get_zoo(name: str, threads: int = 1):
    pattern, arch, count, sweep = ZOOS[name]
    train, test = gen_synthetic(SyntheticSpec(pattern_seed=pattern))
    return build_zoo(architecture(arch), train, test, count, sweep, EPOCHS, os.path.join(CACHE, name), threads=threads)


if __name__ == "__main__":
    for zoo_name in sys.argv[1:] or ZOOS:
        get_zoo(zoo_name)
