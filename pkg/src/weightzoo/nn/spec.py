"""Architecture description for the small CNNs and MLPs of a zoo."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Tuple

from ..exceptions import ShapeError, ValidationError

LAYER_KINDS = ("conv", "dense", "global_avg_pool")
ACTIVATIONS = ("relu", "tanh", "none")
MAX_DROPOUT = 0.7


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters_or_units: int = 0
    kernel_size: int = 0
    stride: int = 1
    activation: str = "none"
    dropout_rate: float = 0.0

    @property
    def has_params(self) -> bool:
        return self.kind in ("conv", "dense")


@dataclass(frozen=True)
class NetworkSpec:
    layers: Tuple[LayerSpec, ...]
    input_shape: Tuple[int, int, int]
    num_classes: int
    name: str = field(default="custom")

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))

    @property
    def param_layers(self) -> List[int]:
        """Indices (into ``layers``) of the layers that own parameters."""
        return [i for i, layer in enumerate(self.layers) if layer.has_params]

    def with_activation(self, activation: str) -> "NetworkSpec":
        """Copy with every hidden parametric layer switched to ``activation``."""
        last = self.param_layers[-1]
        layers = tuple(
            _replace(layer, activation=activation) if layer.has_params and i != last else layer
            for i, layer in enumerate(self.layers)
        )
        return NetworkSpec(layers, self.input_shape, self.num_classes, self.name)

    def with_dropout(self, rate: float) -> "NetworkSpec":
        """Copy with ``rate`` applied to the layers that take dropout.

        CNNs drop conv activations only; MLPs drop hidden dense activations.
        """
        last = self.param_layers[-1]
        has_conv = any(layer.kind == "conv" for layer in self.layers)
        target = "conv" if has_conv else "dense"
        layers = tuple(
            _replace(layer, dropout_rate=rate)
            if layer.kind == target and i != last
            else layer
            for i, layer in enumerate(self.layers)
        )
        return NetworkSpec(layers, self.input_shape, self.num_classes, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [asdict(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            layers=tuple(LayerSpec(**layer) for layer in d["layers"]),
            input_shape=tuple(d["input_shape"]),
            num_classes=int(d["num_classes"]),
            name=d.get("name", "custom"),
        )


def _replace(layer: LayerSpec, **changes) -> LayerSpec:
    d = asdict(layer)
    d.update(changes)
    return LayerSpec(**d)


def conv_output_size(size: int, stride: int) -> int:
    # "same" padding
    return int(math.ceil(size / stride))


def layer_shapes(spec: NetworkSpec) -> List[dict]:
    """Propagate shapes through ``spec``.

    Returns one dict per layer with ``in_shape``, ``out_shape`` and, for
    parametric layers, ``kernel_shape`` and ``bias_shape``. Raises
    ShapeError naming the first inconsistent layer.
    """
    if spec.num_classes < 1:
        raise ValidationError("num_classes must be positive")
    if len(spec.input_shape) != 3 or min(spec.input_shape) < 1:
        raise ShapeError(f"input_shape must be (height, width, channels), got {spec.input_shape}")
    if not spec.layers:
        raise ShapeError("network has no layers")
    shape: Tuple[int, ...] = spec.input_shape
    out = []
    for i, layer in enumerate(spec.layers):
        where = f"layer {i} ({layer.kind})"
        if layer.kind not in LAYER_KINDS:
            raise ShapeError(f"{where}: unknown kind")
        if layer.activation not in ACTIVATIONS:
            raise ShapeError(f"{where}: unknown activation {layer.activation!r}")
        if not 0.0 <= layer.dropout_rate <= MAX_DROPOUT:
            raise ShapeError(f"{where}: dropout_rate {layer.dropout_rate} outside [0, {MAX_DROPOUT}]")
        if layer.dropout_rate > 0 and not layer.has_params:
            raise ShapeError(f"{where}: dropout on a layer without parameters")
        info = {"in_shape": shape}
        if layer.kind == "conv":
            if len(shape) != 3:
                raise ShapeError(f"{where}: conv needs a (h, w, c) input, got {shape}")
            if layer.filters_or_units < 1 or layer.kernel_size < 1 or layer.stride < 1:
                raise ShapeError(f"{where}: filters, kernel_size and stride must be positive")
            h, w, c = shape
            info["kernel_shape"] = (layer.kernel_size, layer.kernel_size, c, layer.filters_or_units)
            info["bias_shape"] = (layer.filters_or_units,)
            shape = (conv_output_size(h, layer.stride), conv_output_size(w, layer.stride), layer.filters_or_units)
        elif layer.kind == "global_avg_pool":
            if len(shape) != 3:
                raise ShapeError(f"{where}: pooling needs a (h, w, c) input, got {shape}")
            shape = (shape[2],)
        else:
            if layer.filters_or_units < 1:
                raise ShapeError(f"{where}: units must be positive")
            fan_in = int(math.prod(shape))
            info["kernel_shape"] = (fan_in, layer.filters_or_units)
            info["bias_shape"] = (layer.filters_or_units,)
            shape = (layer.filters_or_units,)
        info["out_shape"] = shape
        out.append(info)
    last = spec.layers[-1]
    if last.kind != "dense" or shape != (spec.num_classes,):
        raise ShapeError(
            f"layer {len(spec.layers) - 1} ({last.kind}): network must end in a dense layer "
            f"with {spec.num_classes} outputs, got output shape {shape}"
        )
    if last.activation != "none":
        raise ShapeError(f"layer {len(spec.layers) - 1} (dense): output layer must have activation 'none'")
    if last.dropout_rate:
        raise ShapeError(f"layer {len(spec.layers) - 1} (dense): output layer cannot take dropout")
    return out


def param_count(spec: NetworkSpec) -> int:
    total = 0
    for info in layer_shapes(spec):
        if "kernel_shape" in info:
            total += math.prod(info["kernel_shape"]) + math.prod(info["bias_shape"])
    return total


def base_cnn(
    input_shape=(28, 28, 1),
    num_classes: int = 10,
    activation: str = "relu",
    dropout_rate: float = 0.0,
    filters: int = 16,
    stride: int = 2,
) -> NetworkSpec:
    """Three 3x3 conv layers, global average pooling, dense softmax head."""
    conv = [
        LayerSpec("conv", filters, 3, stride, activation, dropout_rate)
        for _ in range(3)
    ]
    layers = conv + [LayerSpec("global_avg_pool"), LayerSpec("dense", num_classes)]
    return NetworkSpec(tuple(layers), tuple(input_shape), num_classes, name="cnn")


def mlp(
    input_shape=(28, 28, 1),
    hidden=(32, 32, 32),
    num_classes: int = 10,
    activation: str = "relu",
    dropout_rate: float = 0.0,
) -> NetworkSpec:
    layers = [LayerSpec("dense", units, activation=activation, dropout_rate=dropout_rate) for units in hidden]
    layers.append(LayerSpec("dense", num_classes))
    return NetworkSpec(tuple(layers), tuple(input_shape), num_classes, name="mlp")
