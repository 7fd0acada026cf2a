"""SGD, Adam and RMSProp updates on ParameterSets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..exceptions import InstabilityError, ShapeError, ValidationError
from .params import ParameterSet

OPTIMIZERS = ("sgd", "adam", "rmsprop")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7
RMSPROP_DECAY = 0.9
RMSPROP_EPS = 1e-7


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    step: int = 0
    first: Optional[List[np.ndarray]] = field(default=None, repr=False)
    second: Optional[List[np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZERS}")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.step < 0:
            raise ValidationError("step counter must be non-negative")


def init_state(kind: str, learning_rate: float, params: ParameterSet) -> OptimizerState:
    state = OptimizerState(kind, learning_rate)
    if kind == "adam":
        state.first = [np.zeros_like(a) for a in params.arrays()]
        state.second = [np.zeros_like(a) for a in params.arrays()]
    elif kind == "rmsprop":
        state.second = [np.zeros_like(a) for a in params.arrays()]
    return state


def optimizer_step(state: OptimizerState, params: ParameterSet, grads: ParameterSet) -> ParameterSet:
    """Apply one update. Mutates ``state`` and returns the new parameters.

    Raises InstabilityError if any updated value is not finite.
    """
    if params.shapes != grads.shapes:
        raise ShapeError("parameter and gradient shapes differ")
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if state.kind != "sgd":
        needed = state.second if state.kind == "rmsprop" else state.first
        if needed is None or [a.shape for a in needed] != [a.shape for a in p_arrays]:
            raise ShapeError("optimizer accumulators do not match the parameters")
    state.step += 1
    lr = state.learning_rate
    out = []
    with np.errstate(all="ignore"):
        if state.kind == "sgd":
            for p, g in zip(p_arrays, g_arrays):
                out.append(p - np.asarray(lr, p.dtype) * g)
        elif state.kind == "adam":
            t = state.step
            c1 = 1.0 - ADAM_BETA1**t
            c2 = 1.0 - ADAM_BETA2**t
            for i, (p, g) in enumerate(zip(p_arrays, g_arrays)):
                m = state.first[i] = ADAM_BETA1 * state.first[i] + (1 - ADAM_BETA1) * g
                v = state.second[i] = ADAM_BETA2 * state.second[i] + (1 - ADAM_BETA2) * g * g
                update = lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
                out.append((p - update).astype(p.dtype, copy=False))
        else:
            for i, (p, g) in enumerate(zip(p_arrays, g_arrays)):
                v = state.second[i] = RMSPROP_DECAY * state.second[i] + (1 - RMSPROP_DECAY) * g * g
                update = lr * g / (np.sqrt(v) + RMSPROP_EPS)
                out.append((p - update).astype(p.dtype, copy=False))
    new = ParameterSet(out[0::2], out[1::2])
    if not new.all_finite():
        raise InstabilityError(f"non-finite parameters after {state.kind} step {state.step}")
    return new
