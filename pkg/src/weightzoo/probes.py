"""Weight-modification probes for estimators trained on raw weights.

A probe perturbs checkpoints (permutations, scaling) and measures how far
the estimator's predictions move, as the mean absolute difference between
predictions on modified and original weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .exceptions import ValidationError
from .features.extract import extract
from .features.table import round_sig
from .nn.params import ParameterSet

PROBE_KINDS = ("global_permute", "permute_all_layers", "permute_conv_layers", "permute_final_layer", "scale")


@dataclass(frozen=True)
class ProbeModification:
    kind: str
    mix_bias_weights: bool = False
    factor: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ValidationError(f"unknown modification {self.kind!r}; expected one of {PROBE_KINDS}")
        if not self.factor > 0:
            raise ValidationError("scale factor must be positive")

    @property
    def label(self) -> str:
        if self.kind == "scale":
            return f"scale:{self.factor:g}"
        return self.kind + (":mixed" if self.mix_bias_weights else "")


def _permute_blocks(rng, blocks: List[np.ndarray], mix: bool) -> List[np.ndarray]:
    """Shuffle the values of ``blocks``: jointly when ``mix``, else each alone."""
    if not mix:
        return [rng.permutation(b.ravel()).reshape(b.shape) for b in blocks]
    joined = rng.permutation(np.concatenate([b.ravel() for b in blocks]))
    out, start = [], 0
    for b in blocks:
        out.append(joined[start:start + b.size].reshape(b.shape))
        start += b.size
    return out


def apply_modification(params: ParameterSet, mod: ProbeModification, rng=None) -> ParameterSet:
    """Return a modified copy of ``params``; the input is left untouched.

    Without ``mix_bias_weights`` kernels and biases are shuffled as separate
    blocks; with it a layer's kernel and bias values (or, for the global
    kind, all values) are pooled first. ``permute_conv_layers`` covers every
    layer but the final one.
    """
    rng = np.random.default_rng(mod.seed) if rng is None else rng
    if mod.kind == "scale":
        return params.scale(mod.factor)
    kernels = [k.copy() for k in params.kernels]
    biases = [b.copy() for b in params.biases]
    n = params.num_layers
    if mod.kind == "global_permute":
        if mod.mix_bias_weights:
            blocks = _permute_blocks(rng, kernels + biases, mix=True)
            return ParameterSet(blocks[:n], blocks[n:])
        return ParameterSet(_permute_blocks(rng, kernels, mix=True), _permute_blocks(rng, biases, mix=True))
    layers = {
        "permute_all_layers": range(n),
        "permute_conv_layers": range(n - 1),
        "permute_final_layer": range(n - 1, n),
    }[mod.kind]
    for i in layers:
        kernels[i], biases[i] = _permute_blocks(rng, [kernels[i], biases[i]], mod.mix_bias_weights)
    return ParameterSet(kernels, biases)


def _features(params: ParameterSet) -> np.ndarray:
    return round_sig(extract(params, "flat_all").values)


def invariance_probe(
    model, zoo, modifications: Sequence[ProbeModification], sample_count: int, seed: int = 0
) -> Dict[str, float]:
    """Mean |F(phi(W)) - F(W)| per modification over sampled checkpoints.

    Checkpoints are drawn without replacement from the ok records of
    ``zoo`` with a generator seeded by ``seed``; the permutation applied to
    checkpoint ``i`` is seeded from ``(mod.seed, i)``.
    """
    if getattr(model, "feature_kind_", None) != "flat_all":
        raise ValidationError(
            f"probes need a model trained on flat_all features, got {getattr(model, 'feature_kind_', None)}"
        )
    records = zoo.ok_records
    if not records or sample_count < 1:
        raise ValidationError("need at least one checkpoint and sample_count >= 1")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(records), size=min(sample_count, len(records)), replace=False))
    originals = [zoo.load_params(records[i]) for i in chosen]
    base = model.predict(np.vstack([_features(p) for p in originals]))
    out = {}
    for mod in modifications:
        rows = []
        for i, params in enumerate(originals):
            mod_rng = np.random.default_rng(np.random.SeedSequence(mod.seed, spawn_key=(i,)))
            rows.append(_features(apply_modification(params, mod, mod_rng)))
        out[mod.label] = float(np.mean(np.abs(model.predict(np.vstack(rows)) - base)))
    return out
