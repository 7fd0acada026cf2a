"""Numpy engine for the small CNNs and MLPs that make up a zoo."""
from .engine import accuracy, evaluate_split, forward, loss_and_grads, predict_classes
from .optim import OptimizerState, init_state, optimizer_step
from .params import INITIALIZERS, ParameterSet, init_params
from .spec import LayerSpec, NetworkSpec, mlp, base_cnn, param_count

__all__ = [
    "INITIALIZERS",
    "LayerSpec",
    "NetworkSpec",
    "OptimizerState",
    "ParameterSet",
    "accuracy",
    "evaluate_split",
    "forward",
    "init_params",
    "init_state",
    "loss_and_grads",
    "mlp",
    "optimizer_step",
    "base_cnn",
    "param_count",
    "predict_classes",
]
