"""Forward and backward passes for conv / pooling / dense stacks.

Inputs are NHWC. Convolutions use "same" zero padding and are computed as
an im2col matrix product; kernels are stored as (kh, kw, in, out) and dense
kernels as (fan_in, fan_out). Arithmetic runs in the dtype of the
parameters, so a float64 ParameterSet gives a float64 pass.
"""
from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import InstabilityError, ShapeError, ValidationError
from .params import ParameterSet, check_params
from .spec import NetworkSpec, layer_shapes


def _same_padding(size: int, k: int, stride: int) -> Tuple[int, int]:
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def _conv_forward(x, kernel, bias, stride):
    n, h, w, c = x.shape
    k = kernel.shape[0]
    f = kernel.shape[-1]
    ho, wo = math.ceil(h / stride), math.ceil(w / stride)
    top, bottom = _same_padding(h, k, stride)
    left, right = _same_padding(w, k, stride)
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    cols = np.empty((n, ho, wo, k, k, c), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :]
    cols = cols.reshape(n * ho * wo, k * k * c)
    z = cols @ kernel.reshape(-1, f) + bias
    return z.reshape(n, ho, wo, f), (cols, x.shape, (top, left))


def _conv_backward(dz, kernel, stride, cache, need_dx):
    cols, x_shape, (top, left) = cache
    n, h, w, c = x_shape
    k = kernel.shape[0]
    f = kernel.shape[-1]
    _, ho, wo, _ = dz.shape
    dz2 = dz.reshape(-1, f)
    dk = (cols.T @ dz2).reshape(kernel.shape)
    db = dz2.sum(axis=0)
    if not need_dx:
        return None, dk, db
    dcols = (dz2 @ kernel.reshape(-1, f).T).reshape(n, ho, wo, k, k, c)
    hp = max((ho - 1) * stride + k, h + top)
    wp = max((wo - 1) * stride + k, w + left)
    dxp = np.zeros((n, hp, wp, c), dtype=dz.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += dcols[:, :, :, i, j, :]
    return dxp[:, top:top + h, left:left + w, :], dk, db


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(da, z, a, kind):
    if kind == "relu":
        return da * (z > 0)
    if kind == "tanh":
        return da * (1 - a * a)
    return da


def _check_batch(spec: NetworkSpec, batch) -> np.ndarray:
    x = np.asarray(batch)
    if x.ndim == 3 and spec.input_shape[2] == 1:
        x = x[..., None]
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise ShapeError(f"batch shape {x.shape} does not match input shape {spec.input_shape}")
    return x


def forward_train(
    spec: NetworkSpec,
    params: ParameterSet,
    batch,
    rng: Optional[np.random.Generator] = None,
):
    """Forward pass keeping everything the backward pass needs.

    Dropout is active only when ``rng`` is given.
    """
    x = _check_batch(spec, batch).astype(params.dtype, copy=False)
    caches = []
    p = 0
    for layer in spec.layers:
        if layer.kind == "global_avg_pool":
            caches.append(x.shape)
            x = x.mean(axis=(1, 2))
            continue
        kernel, bias = params.kernels[p], params.biases[p]
        p += 1
        if layer.kind == "conv":
            z, conv_cache = _conv_forward(x, kernel, bias, layer.stride)
        else:
            conv_cache = x.shape
            x = x.reshape(x.shape[0], -1)
            z = x @ kernel + bias
        a = _activate(z, layer.activation)
        mask = None
        if rng is not None and layer.dropout_rate > 0:
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(a.shape, dtype=np.float64) < keep).astype(a.dtype) / np.asarray(keep, a.dtype)
            a = a * mask
        caches.append((x if layer.kind == "dense" else None, conv_cache, z, a, mask))
        x = a
    return x, caches


def backward(spec: NetworkSpec, params: ParameterSet, caches, dout) -> ParameterSet:
    """Gradients of the parameters given d(loss)/d(network output)."""
    dk_list: List[np.ndarray] = [None] * params.num_layers
    db_list: List[np.ndarray] = [None] * params.num_layers
    p = params.num_layers
    d = dout
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        cache = caches[idx]
        if layer.kind == "global_avg_pool":
            n, h, w, c = cache
            d = np.broadcast_to(d[:, None, None, :] / (h * w), cache).astype(d.dtype)
            continue
        p -= 1
        x_in, layer_cache, z, a, mask = cache
        if mask is not None:
            d = d * mask
        dz = _activation_grad(d, z, a, layer.activation)
        kernel = params.kernels[p]
        need_dx = idx > 0
        if layer.kind == "conv":
            d, dk, db = _conv_backward(dz, kernel, layer.stride, layer_cache, need_dx)
        else:
            dk = x_in.T @ dz
            db = dz.sum(axis=0)
            d = (dz @ kernel.T).reshape(layer_cache) if need_dx else None
        dk_list[p], db_list[p] = dk, db
    return ParameterSet(dk_list, db_list)


def forward(spec: NetworkSpec, params: ParameterSet, batch, batch_size: int = 1024) -> np.ndarray:
    """Inference-mode logits, shape (n, num_classes)."""
    check_params(spec, params)
    x = _check_batch(spec, batch)
    out = [forward_train(spec, params, x[i:i + batch_size])[0] for i in range(0, len(x), batch_size)]
    if not out:
        return np.zeros((0, spec.num_classes), dtype=params.dtype)
    return np.concatenate(out)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    logp = log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean(dtype=np.float64)
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1
    return float(loss), d / np.asarray(n, logits.dtype)


def _check_labels(spec: NetworkSpec, labels, n: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= spec.num_classes):
        raise ValidationError(f"labels must lie in [0, {spec.num_classes})")
    return labels.astype(np.int64)


def l2_penalty(params: ParameterSet, l2_coeff: float) -> float:
    return l2_coeff * params.sum_squares()


def loss_and_grads(
    spec: NetworkSpec,
    params: ParameterSet,
    batch,
    labels,
    l2_coeff: float = 0.0,
    dropout_seed: Optional[int] = None,
) -> Tuple[float, ParameterSet]:
    """Mean softmax cross-entropy plus ``l2_coeff * sum(params**2)``.

    ``dropout_seed=None`` disables dropout. Raises InstabilityError when the
    loss or any gradient entry is not finite.
    """
    check_params(spec, params)
    x = _check_batch(spec, batch)
    y = _check_labels(spec, labels, len(x))
    rng = None if dropout_seed is None else np.random.default_rng(dropout_seed)
    with np.errstate(all="ignore"):
        logits, caches = forward_train(spec, params, x, rng)
        loss, dlogits = softmax_cross_entropy(logits, y)
        grads = backward(spec, params, caches, dlogits)
        if l2_coeff:
            loss += l2_penalty(params, l2_coeff)
            two_l2 = np.asarray(2.0 * l2_coeff, params.dtype)
            grads = ParameterSet(
                [g + two_l2 * w for g, w in zip(grads.kernels, params.kernels)],
                [g + two_l2 * w for g, w in zip(grads.biases, params.biases)],
            )
    if not np.isfinite(loss) or not grads.all_finite():
        raise InstabilityError("non-finite loss or gradient")
    return loss, grads


def predict_classes(spec: NetworkSpec, params: ParameterSet, images, batch_size: int = 1024) -> np.ndarray:
    # np.argmax returns the first maximum: ties go to the lowest class index
    return np.argmax(forward(spec, params, images, batch_size), axis=1)


def accuracy(spec: NetworkSpec, params: ParameterSet, dataset, labels=None) -> float:
    """Fraction of examples whose arg-max logit equals the label.

    ``dataset`` is either a Dataset or an image array (with ``labels``).
    """
    images, labels = _unpack(dataset, labels)
    if len(images) == 0:
        raise ValidationError("accuracy of an empty dataset is undefined")
    labels = _check_labels(spec, labels, len(images))
    return float(np.mean(predict_classes(spec, params, images) == labels))


def evaluate_split(spec: NetworkSpec, params: ParameterSet, dataset, labels=None) -> Tuple[float, float]:
    """(accuracy, mean cross-entropy) in inference mode, no regularizer."""
    images, labels = _unpack(dataset, labels)
    if len(images) == 0:
        raise ValidationError("cannot evaluate an empty dataset")
    labels = _check_labels(spec, labels, len(images))
    with np.errstate(all="ignore"):
        logits = forward(spec, params, images)
        logp = log_softmax(logits.astype(np.float64))
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    loss = float(-logp[np.arange(len(labels)), labels].mean())
    return acc, loss


def _unpack(dataset, labels):
    if labels is None:
        return dataset.images, dataset.labels
    return np.asarray(dataset), labels


def layer_counts(spec: NetworkSpec) -> List[int]:
    return [
        math.prod(info["kernel_shape"]) + math.prod(info["bias_shape"])
        for info in layer_shapes(spec)
        if "kernel_shape" in info
    ]
