"""Binary checkpoint format.

Layout::

    b"WZOO" | version (1 byte) | header length (uint32 LE) | JSON header
    | per layer: kernel then bias, float32 little-endian, declared order
"""
from __future__ import annotations

import json
import math
import os
import struct

import numpy as np

from ..exceptions import CheckpointError, VersionMismatchError
from ..nn.params import ParameterSet

MAGIC = b"WZOO"
FORMAT_VERSION = 1


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def encode_checkpoint(params: ParameterSet, header: dict) -> bytes:
    header = dict(header)
    header["layers"] = [
        {"name": f"L{i + 1}", "kernel_shape": list(k.shape), "bias_shape": list(b.shape)}
        for i, (k, b) in enumerate(zip(params.kernels, params.biases))
    ]
    header["dtype"] = "float32-le"
    blob = dumps_canonical(header).encode()
    body = np.concatenate([a.ravel() for a in params.arrays()]).astype("<f4").tobytes()
    return MAGIC + bytes([FORMAT_VERSION]) + struct.pack("<I", len(blob)) + blob + body


def write_checkpoint(path, params: ParameterSet, header: dict) -> None:
    data = encode_checkpoint(params, header)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def decode_checkpoint(data: bytes, source: str = "<bytes>"):
    if len(data) < 9 or data[:4] != MAGIC:
        raise CheckpointError(f"{source}: not a WZOO checkpoint")
    if data[4] != FORMAT_VERSION:
        raise VersionMismatchError(f"{source}: checkpoint version {data[4]}, expected {FORMAT_VERSION}")
    (hlen,) = struct.unpack("<I", data[5:9])
    if len(data) < 9 + hlen:
        raise CheckpointError(f"{source}: truncated header")
    try:
        header = json.loads(data[9:9 + hlen])
        layers = header["layers"]
    except (ValueError, KeyError) as exc:
        raise CheckpointError(f"{source}: corrupt header ({exc})") from None
    shapes = [(tuple(l["kernel_shape"]), tuple(l["bias_shape"])) for l in layers]
    total = sum(math.prod(k) + math.prod(b) for k, b in shapes)
    body = data[9 + hlen:]
    if len(body) != 4 * total:
        raise CheckpointError(f"{source}: expected {4 * total} bytes of weights, found {len(body)}")
    vector = np.frombuffer(body, dtype="<f4").astype(np.float32)
    return header, ParameterSet.unflatten(vector, shapes)


def read_checkpoint(path):
    """Return ``(header, ParameterSet)``."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise CheckpointError(f"{path}: {exc.strerror}") from None
    return decode_checkpoint(data, os.fspath(path))
