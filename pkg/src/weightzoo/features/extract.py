"""Feature vectors computed from parameter sets and hyperparameters.

Feature kinds are plain strings:

``flat_all``, ``flat_layer:<l>``, ``stats_global``, ``stats_per_layer``,
``stats_layer_subset:<l>[,<l>...]`` (``final`` names the last layer
whatever the depth), ``norms_l1``, ``norms_l2``, ``hyperparams``,
``hyperparams_lr``, ``hyperparams_plus_flat`` and ``bias_range``.

Layers are numbered from 1 over parametric layers only (pooling does not
count), so the base CNN has layers L1..L4 with L4 the dense head.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ShapeError, ValidationError
from ..nn.optim import OPTIMIZERS
from ..nn.params import INITIALIZERS, ParameterSet
from ..zoo.hyperparams import ACTIVATIONS, HyperParams
from .stats import STAT_NAMES, stat_block

SIMPLE_KINDS = (
    "flat_all",
    "stats_global",
    "stats_per_layer",
    "norms_l1",
    "norms_l2",
    "hyperparams",
    "hyperparams_lr",
    "hyperparams_plus_flat",
    "bias_range",
)
HYPERPARAM_FIELDS = (
    "optimizer",
    "learning_rate",
    "l2_coeff",
    "dropout_rate",
    "init_variance",
    "init_type",
    "activation",
    "train_fraction",
)
_CODES = {"optimizer": OPTIMIZERS, "init_type": INITIALIZERS, "activation": ACTIVATIONS}


@dataclass(frozen=True)
class FeatureKind:
    base: str
    layers: Tuple = ()

    def __str__(self) -> str:
        if self.base == "flat_layer":
            return f"flat_layer:{self.layers[0]}"
        if self.base == "stats_layer_subset":
            return "stats_layer_subset:" + ",".join(str(l) for l in self.layers)
        return self.base

    @property
    def needs_hyperparams(self) -> bool:
        return self.base.startswith("hyperparams")

    @property
    def needs_params(self) -> bool:
        return self.base not in ("hyperparams", "hyperparams_lr")

    @property
    def architecture_agnostic(self) -> bool:
        """True when the dimension does not depend on layer sizes."""
        return self.base in ("stats_global", "stats_per_layer", "norms_l1", "norms_l2", "bias_range") or (
            self.base == "stats_layer_subset"
        )


def parse_kind(kind) -> FeatureKind:
    if isinstance(kind, FeatureKind):
        return kind
    text = str(kind).strip()
    base, _, arg = text.partition(":")
    if base in SIMPLE_KINDS and not arg:
        return FeatureKind(base)
    if base == "flat_layer" and arg:
        return FeatureKind(base, (_layer_token(arg),))
    if base == "stats_layer_subset" and arg:
        tokens = tuple(_layer_token(t) for t in arg.split(","))
        if len(set(tokens)) != len(tokens):
            raise ValidationError(f"repeated layer in {text!r}")
        return FeatureKind(base, tokens)
    raise ValidationError(f"unknown feature kind {text!r}")


def _layer_token(token: str):
    token = token.strip().lstrip("Ll")
    if token == "final":
        return "final"
    try:
        value = int(token)
    except ValueError:
        raise ValidationError(f"bad layer index {token!r}") from None
    if value < 1:
        raise ValidationError("layers are numbered from 1")
    return value


def _resolve(layer, num_layers: int) -> int:
    index = num_layers if layer == "final" else layer
    if not 1 <= index <= num_layers:
        raise ShapeError(f"layer {layer} not present; architecture has {num_layers} parametric layers")
    return index


def _label(layer) -> str:
    return "Lfinal" if layer == "final" else f"L{layer}"


@dataclass
class FeatureVector:
    values: np.ndarray
    names: List[str]
    kind: str

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ShapeError("feature values and names differ in length")

    def __len__(self) -> int:
        return len(self.values)


def _flat(params: ParameterSet, layers: Sequence[int]):
    values, names = [], []
    for l in layers:
        k, b = params.kernels[l - 1], params.biases[l - 1]
        values += [k.ravel(), b.ravel()]
        names += [f"L{l}.kernel.{i}" for i in range(k.size)]
        names += [f"L{l}.bias.{i}" for i in range(b.size)]
    return np.concatenate(values).astype(np.float64), names


def _stats(params: ParameterSet, layers: Sequence):
    values, names = [], []
    for layer in layers:
        l = _resolve(layer, params.num_layers)
        for part, array in (("kernel", params.kernels[l - 1]), ("bias", params.biases[l - 1])):
            values.append(stat_block(array).as_array())
            names += [f"{_label(layer)}.{part}.{s}" for s in STAT_NAMES]
    return np.concatenate(values), names


def layer_norms(params: ParameterSet, p: int) -> FeatureVector:
    """Per-layer l1 or l2 (Euclidean, not squared) norms, kernel then bias."""
    if p not in (1, 2):
        raise ValidationError("norm order must be 1 or 2")
    values, names = [], []
    for l, (k, b) in enumerate(zip(params.kernels, params.biases), start=1):
        for part, array in (("kernel", k), ("bias", b)):
            a = np.asarray(array, dtype=np.float64).ravel()
            values.append(np.abs(a).sum() if p == 1 else np.sqrt(np.dot(a, a)))
            names.append(f"L{l}.{part}.l{p}")
    return FeatureVector(np.array(values, dtype=np.float64), names, f"norms_l{p}")


def encode_hyperparams(hp: HyperParams) -> np.ndarray:
    """Categoricals become integer codes; reals stay raw (no log transform)."""
    out = []
    for name in HYPERPARAM_FIELDS:
        value = getattr(hp, name)
        out.append(_CODES[name].index(value) if name in _CODES else float(value))
    return np.array(out, dtype=np.float64)


def extract(params: Optional[ParameterSet], kind, hp: Optional[HyperParams] = None) -> FeatureVector:
    k = parse_kind(kind)
    if k.needs_hyperparams and hp is None:
        raise ValidationError(f"feature kind {k} needs hyperparameters")
    if k.needs_params and params is None:
        raise ValidationError(f"feature kind {k} needs a parameter set")
    n = params.num_layers if params is not None else 0
    base = k.base
    if base == "flat_all":
        values, names = _flat(params, range(1, n + 1))
    elif base == "flat_layer":
        values, names = _flat(params, [_resolve(k.layers[0], n)])
    elif base == "stats_global":
        values = stat_block(params.flatten()).as_array()
        names = [f"all.{s}" for s in STAT_NAMES]
    elif base == "stats_per_layer":
        values, names = _stats(params, range(1, n + 1))
    elif base == "stats_layer_subset":
        values, names = _stats(params, k.layers)
    elif base in ("norms_l1", "norms_l2"):
        fv = layer_norms(params, int(base[-1]))
        values, names = fv.values, fv.names
    elif base == "hyperparams":
        values = encode_hyperparams(hp)
        names = [f"hp.{f}" for f in HYPERPARAM_FIELDS]
    elif base == "hyperparams_lr":
        values = np.array([hp.learning_rate], dtype=np.float64)
        names = ["hp.learning_rate"]
    elif base == "hyperparams_plus_flat":
        flat, flat_names = _flat(params, range(1, n + 1))
        values = np.concatenate([encode_hyperparams(hp), flat])
        names = [f"hp.{f}" for f in HYPERPARAM_FIELDS] + flat_names
    else:  # bias_range
        values = np.array([float(np.ptp(b)) for b in params.biases], dtype=np.float64)
        names = [f"L{l}.bias.range" for l in range(1, n + 1)]
    return FeatureVector(np.asarray(values, dtype=np.float64), list(names), str(k))


class WeightFeatures(TransformerMixin, BaseEstimator):
    """Turn a list of ParameterSets (and optionally HyperParams) into a matrix.

    ``fit`` only records the layout and feature names of the first network;
    ``transform`` rejects networks whose feature names differ.
    """

    def __init__(self, kind="stats_per_layer"):
        self.kind = kind

    def fit(self, X, y=None, hyperparams=None):
        X = list(X)
        if not X and parse_kind(self.kind).needs_params:
            raise ValidationError("cannot fit on an empty list of networks")
        first_hp = hyperparams[0] if hyperparams is not None else None
        first = extract(X[0] if X else None, self.kind, first_hp)
        self.kind_ = first.kind
        self.feature_names_out_ = np.array(first.names, dtype=object)
        self.n_features_out_ = len(first.names)
        return self

    def transform(self, X, hyperparams=None):
        check_is_fitted(self, "feature_names_out_")
        X = list(X)
        if hyperparams is None:
            hyperparams = [None] * len(X)
        rows = []
        for params, hp in zip(X, hyperparams):
            fv = extract(params, self.kind_, hp)
            if len(fv.names) != self.n_features_out_ or fv.names != list(self.feature_names_out_):
                raise ShapeError(f"network features do not match the fitted layout for {self.kind_}")
            rows.append(fv.values)
        return np.vstack(rows) if rows else np.zeros((0, self.n_features_out_))

    def fit_transform(self, X, y=None, hyperparams=None):
        X = list(X)
        return self.fit(X, hyperparams=hyperparams).transform(X, hyperparams)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_out_")
        return self.feature_names_out_.copy()
