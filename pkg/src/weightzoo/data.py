"""Grayscale image datasets: IDX files, synthetic textures, subsampling.

Pixels are always float32 in [-1, 1]. Raw bytes map linearly
(0 -> -1, 255 -> +1); synthetic images are generated on the same 256-level
grid so that writing them as IDX and reading them back is lossless.
"""
from __future__ import annotations

import gzip
import math
import os
import struct
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import (
    BadMagicError,
    CountMismatchError,
    TruncatedFileError,
    ValidationError,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
TRAIN_FRACTIONS = (0.1, 0.25, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    name: str
    split: str
    num_classes: int = 10

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        if images.ndim == 3:
            images = images[..., None]
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 4 or images.shape[-1] != 1:
            raise ValidationError(f"images must be (n, height, width, 1), got {images.shape}")
        if len(images) == 0:
            raise ValidationError("dataset is empty")
        if labels.shape != (len(images),):
            raise ValidationError(f"{len(images)} images but labels have shape {labels.shape}")
        if self.split not in ("train", "test"):
            raise ValidationError(f"split must be 'train' or 'test', got {self.split!r}")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValidationError(f"labels must lie in [0, {self.num_classes})")
        if not (np.isfinite(images).all() and images.min() >= -1.0 and images.max() <= 1.0):
            raise ValidationError("pixel values must lie in [-1, 1]")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def take(self, indices, name: Optional[str] = None) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices], name or self.name, self.split, self.num_classes)


def bytes_to_pixels(raw: np.ndarray) -> np.ndarray:
    return (raw.astype(np.float64) * (2.0 / 255.0) - 1.0).astype(np.float32)


def pixels_to_bytes(pixels: np.ndarray) -> np.ndarray:
    return np.rint((np.asarray(pixels, dtype=np.float64) + 1.0) * 127.5).clip(0, 255).astype(np.uint8)


def _open(path):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, magic: int, what: str) -> np.ndarray:
    with _open(path) as f:
        data = f.read()
    if len(data) < 8:
        raise TruncatedFileError(f"{path}: {what} file shorter than its header")
    found = struct.unpack(">I", data[:4])[0]
    if found != magic:
        raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x} for {what}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedFileError(f"{path}: {what} header truncated")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = math.prod(dims)
    if len(data) - header < size:
        raise TruncatedFileError(f"{path}: expected {size} bytes of {what}, found {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path, name: str = "idx", split: str = "train", num_classes: int = 10) -> Dataset:
    """Read an IDX image/label file pair (optionally gzipped)."""
    raw_images = _read_idx(images_path, IMAGE_MAGIC, "image")
    raw_labels = _read_idx(labels_path, LABEL_MAGIC, "label")
    if len(raw_images) != len(raw_labels):
        raise CountMismatchError(
            f"{images_path} holds {len(raw_images)} images but {labels_path} holds {len(raw_labels)} labels"
        )
    if len(raw_labels) and raw_labels.max() >= num_classes:
        raise ValidationError(f"{labels_path}: label {int(raw_labels.max())} outside [0, {num_classes})")
    return Dataset(bytes_to_pixels(raw_images), raw_labels.astype(np.int64), name, split, num_classes)


def write_idx(dataset: Dataset, images_path, labels_path) -> None:
    raw = pixels_to_bytes(dataset.images[..., 0])
    n, h, w = raw.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, h, w))
        f.write(raw.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, n))
        f.write(dataset.labels.astype(np.uint8).tobytes())


_IDX_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find(directory, stem):
    for candidate in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        path = os.path.join(directory, candidate)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def load_idx_dir(
    directory,
    name: Optional[str] = None,
    max_train: Optional[int] = None,
    max_test: Optional[int] = None,
    seed: int = 0,
) -> Tuple[Dataset, Dataset]:
    """Load an MNIST-layout directory, optionally reduced to ``max_train``
    training and ``max_test`` test images (seeded uniform sample)."""
    name = name or os.path.basename(os.path.normpath(directory))
    out = []
    for split, limit in (("train", max_train), ("test", max_test)):
        images, labels = _IDX_NAMES[split]
        ds = load_idx(_find(directory, images), _find(directory, labels), name, split)
        if limit is not None and limit < len(ds):
            rng = np.random.default_rng([seed, 0 if split == "train" else 1])
            ds = ds.take(np.sort(rng.choice(len(ds), size=limit, replace=False)))
        out.append(ds)
    return out[0], out[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Oriented-grating texture classes.

    Each class owns an orientation and a spatial frequency; samples draw a
    random phase, contrast and offset and add pixel noise. Global average
    pooling discards position, so classes differ only in local texture.
    """

    num_classes: int = 10
    samples_per_class: int = 500
    image_size: int = 16
    pattern_seed: int = 0
    test_samples_per_class: int = 1000
    noise: float = 0.5

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _class_prototypes(spec: SyntheticSpec):
    rng = np.random.default_rng([spec.pattern_seed, 7919])
    n_orient = max(1, math.ceil(spec.num_classes / 2))
    base = np.arange(n_orient) * np.pi / n_orient
    protos = []
    for c in range(spec.num_classes):
        theta = base[c % n_orient] + rng.uniform(-0.15, 0.15)
        band = c // n_orient
        freq = (0.12 if band == 0 else 0.3) * rng.uniform(0.85, 1.15)
        protos.append((theta, freq))
    order = rng.permutation(spec.num_classes)
    return [protos[i] for i in order]


def _render(spec: SyntheticSpec, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    protos = _class_prototypes(spec)
    theta = np.array([protos[c][0] for c in labels])[:, None, None]
    freq = np.array([protos[c][1] for c in labels])[:, None, None]
    n = len(labels)
    phase = rng.uniform(0, 2 * np.pi, n)[:, None, None]
    contrast = rng.uniform(0.4, 0.9, n)[:, None, None]
    offset = rng.uniform(-0.2, 0.2, n)[:, None, None]
    wave = np.sin(2 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    img = offset + contrast * wave + spec.noise * rng.standard_normal((n, size, size))
    return bytes_to_pixels(pixels_to_bytes(np.clip(img, -1, 1)))[..., None]


def gen_synthetic(spec: SyntheticSpec) -> Tuple[Dataset, Dataset]:
    """Balanced train/test texture datasets, deterministic in ``pattern_seed``."""
    if spec.image_size < 8:
        raise ValidationError("synthetic images need image_size >= 8")
    if spec.num_classes < 2 or spec.samples_per_class < 1 or spec.test_samples_per_class < 1:
        raise ValidationError("need >= 2 classes and >= 1 sample per class")
    name = f"synthetic-{spec.pattern_seed}"
    out = []
    for split, per_class, stream in (
        ("train", spec.samples_per_class, 1),
        ("test", spec.test_samples_per_class, 2),
    ):
        rng = np.random.default_rng([spec.pattern_seed, stream])
        labels = rng.permutation(np.repeat(np.arange(spec.num_classes), per_class))
        out.append(Dataset(_render(spec, labels, rng), labels, name, split, spec.num_classes))
    return out[0], out[1]


def subsample(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Uniform sample without replacement of ``floor(fraction * n)`` rows."""
    if fraction not in TRAIN_FRACTIONS:
        raise ValidationError(f"fraction {fraction} not in {TRAIN_FRACTIONS}")
    if fraction == 1.0:
        return dataset
    size = int(math.floor(fraction * len(dataset)))
    if size < 1:
        raise ValidationError(f"fraction {fraction} of {len(dataset)} rows leaves nothing")
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    return dataset.take(np.sort(rng.choice(len(dataset), size=size, replace=False)))
