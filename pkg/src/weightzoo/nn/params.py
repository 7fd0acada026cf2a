"""Layered parameter container and the weight initializers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..exceptions import ShapeError, ValidationError
from .spec import NetworkSpec, layer_shapes

INITIALIZERS = ("xavier_normal", "he_normal", "orthogonal", "normal", "truncated_normal")
INIT_VARIANCE_RANGE = (1e-3, 0.5)


@dataclass
class ParameterSet:
    """Per-layer kernels and biases of one network.

    Storage order is layer by layer, kernel (C order) then bias; ``flatten``
    and ``unflatten`` use exactly that order.
    """

    kernels: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        if len(self.kernels) != len(self.biases):
            raise ShapeError("kernels and biases must pair up layer by layer")

    @property
    def num_layers(self) -> int:
        return len(self.kernels)

    @property
    def shapes(self) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        return [(k.shape, b.shape) for k, b in zip(self.kernels, self.biases)]

    @property
    def size(self) -> int:
        return sum(k.size + b.size for k, b in zip(self.kernels, self.biases))

    @property
    def dtype(self):
        return self.kernels[0].dtype

    def arrays(self) -> List[np.ndarray]:
        out = []
        for k, b in zip(self.kernels, self.biases):
            out.extend((k, b))
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def unflatten(cls, vector, shapes) -> "ParameterSet":
        vector = np.asarray(vector)
        expected = sum(math.prod(ks) + math.prod(bs) for ks, bs in shapes)
        if vector.ndim != 1 or vector.size != expected:
            raise ShapeError(f"flat vector has {vector.size} entries, layout needs {expected}")
        kernels, biases, pos = [], [], 0
        for ks, bs in shapes:
            n = math.prod(ks)
            kernels.append(vector[pos:pos + n].reshape(ks).copy())
            pos += n
            n = math.prod(bs)
            biases.append(vector[pos:pos + n].reshape(bs).copy())
            pos += n
        return cls(kernels, biases)

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet([k.astype(dtype) for k in self.kernels], [b.astype(dtype) for b in self.biases])

    def copy(self) -> "ParameterSet":
        return self.astype(self.dtype)

    def map(self, fn) -> "ParameterSet":
        return ParameterSet([fn(k) for k in self.kernels], [fn(b) for b in self.biases])

    def scale(self, factor: float) -> "ParameterSet":
        return self.map(lambda a: (a * factor).astype(a.dtype))

    def zeros_like(self) -> "ParameterSet":
        return self.map(np.zeros_like)

    def sum_squares(self) -> float:
        return float(sum(np.sum(np.square(a, dtype=np.float64)) for a in self.arrays()))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "ParameterSet") -> bool:
        """Bit-identical comparison (shapes, dtypes and values)."""
        if self.shapes != other.shapes:
            return False
        return all(
            a.dtype == b.dtype and np.array_equal(a, b)
            for a, b in zip(self.arrays(), other.arrays())
        )


def expected_shapes(spec: NetworkSpec):
    return [(info["kernel_shape"], info["bias_shape"]) for info in layer_shapes(spec) if "kernel_shape" in info]


def check_params(spec: NetworkSpec, params: ParameterSet) -> None:
    want = expected_shapes(spec)
    if params.shapes != want:
        for i, (got, exp) in enumerate(zip(params.shapes, want)):
            if got != exp:
                raise ShapeError(f"parameter layer {i + 1}: shape {got} does not match architecture {exp}")
        raise ShapeError(f"parameter set has {params.num_layers} layers, architecture has {len(want)}")


def _fans(kernel_shape) -> Tuple[int, int]:
    if len(kernel_shape) == 2:
        return kernel_shape[0], kernel_shape[1]
    receptive = math.prod(kernel_shape[:-2])
    return receptive * kernel_shape[-2], receptive * kernel_shape[-1]


def _truncated_normal(rng: np.random.Generator, std: float, shape) -> np.ndarray:
    # resample anything beyond two standard deviations
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def _orthogonal(rng: np.random.Generator, gain: float, shape) -> np.ndarray:
    rows = math.prod(shape[:-1])
    cols = shape[-1]
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q).reshape(shape)


def init_kernel(rng: np.random.Generator, kind: str, variance: float, shape) -> np.ndarray:
    """Draw one kernel.

    ``variance`` multiplies the scheme's native variance: plain normal draws
    have variance ``variance``; Xavier/He scale their native standard
    deviation by ``sqrt(variance)``; orthogonal uses gain ``sqrt(variance)``.
    """
    scale = math.sqrt(variance)
    fan_in, fan_out = _fans(shape)
    if kind == "normal":
        return rng.standard_normal(shape) * scale
    if kind == "truncated_normal":
        return _truncated_normal(rng, scale, shape)
    if kind == "xavier_normal":
        return rng.standard_normal(shape) * scale * math.sqrt(2.0 / (fan_in + fan_out))
    if kind == "he_normal":
        return rng.standard_normal(shape) * scale * math.sqrt(2.0 / fan_in)
    if kind == "orthogonal":
        return _orthogonal(rng, scale, shape)
    raise ValidationError(f"unknown initializer {kind!r}; expected one of {INITIALIZERS}")


def init_params(spec: NetworkSpec, init: str, variance: float, seed: int, dtype=np.float32) -> ParameterSet:
    """Initialize all kernels with ``init``; biases are always zero."""
    if init not in INITIALIZERS:
        raise ValidationError(f"unknown initializer {init!r}; expected one of {INITIALIZERS}")
    if not variance > 0:
        raise ValidationError("initializer variance must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))
    kernels, biases = [], []
    for ks, bs in expected_shapes(spec):
        kernels.append(init_kernel(rng, init, variance, ks).astype(dtype))
        biases.append(np.zeros(bs, dtype=dtype))
    return ParameterSet(kernels, biases)


def zeros(spec: NetworkSpec, dtype=np.float32) -> ParameterSet:
    shapes: Sequence = expected_shapes(spec)
    return ParameterSet([np.zeros(k, dtype) for k, _ in shapes], [np.zeros(b, dtype) for _, b in shapes])
