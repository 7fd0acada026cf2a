"""Sigmoid-output regressors built on the network engine's dense layers."""
from __future__ import annotations

from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from ..exceptions import InstabilityError, ValidationError
from ..nn.engine import backward, forward_train
from ..nn.optim import init_state, optimizer_step
from ..nn.params import INITIALIZERS, ParameterSet, init_kernel
from ..nn.spec import LayerSpec, NetworkSpec
from .base import AccuracyRegressor


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class DNNRegressor(AccuracyRegressor):
    """Fully connected ReLU network with a sigmoid output, trained on MSE.

    Inputs are standardized with the training mean and standard deviation.
    The l2 penalty ``l2_coeff * sum(kernel**2)`` covers kernels only.
    ``num_layers`` counts hidden layers; zero gives the logit-linear model.
    """

    kind = "dnn"

    def __init__(
        self,
        num_layers: int = 3,
        num_units: int = 256,
        dropout_rate: float = 0.0,
        l2_coeff: float = 1e-6,
        learning_rate: float = 1e-3,
        init_variance: float = 0.01,
        init_type: str = "he_normal",
        optimizer: str = "adam",
        batch_size: int = 128,
        epochs: int = 100,
        random_state: int = 0,
    ):
        self.num_layers = num_layers
        self.num_units = num_units
        self.dropout_rate = dropout_rate
        self.l2_coeff = l2_coeff
        self.learning_rate = learning_rate
        self.init_variance = init_variance
        self.init_type = init_type
        self.optimizer = optimizer
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    def _network(self, n_features: int) -> NetworkSpec:
        hidden = [
            LayerSpec("dense", self.num_units, activation="relu", dropout_rate=self.dropout_rate)
            for _ in range(self.num_layers)
        ]
        return NetworkSpec(tuple(hidden) + (LayerSpec("dense", 1),), (1, 1, n_features), 1, name=self.kind)

    def _init(self, net: NetworkSpec, rng) -> ParameterSet:
        kernels, biases = [], []
        fan_in = net.input_shape[-1]
        for layer in net.layers:
            shape = (fan_in, layer.filters_or_units)
            if self.init_type == "zeros":
                kernels.append(np.zeros(shape))
            else:
                kernels.append(init_kernel(rng, self.init_type, self.init_variance, shape))
            biases.append(np.zeros(layer.filters_or_units))
            fan_in = layer.filters_or_units
        return ParameterSet(kernels, biases)

    def _validate_params(self):
        if self.num_layers < 0 or (self.num_layers and self.num_units < 1):
            raise ValidationError("num_layers must be >= 0 and num_units >= 1")
        if self.init_type not in INITIALIZERS + ("zeros",):
            raise ValidationError(f"unknown initializer {self.init_type!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("batch_size must be >= 1 and epochs >= 0")
        if not 0 <= self.dropout_rate < 1 or self.l2_coeff < 0:
            raise ValidationError("dropout_rate must lie in [0, 1) and l2_coeff be non-negative")

    def _fit(self, X, y):
        self._validate_params()
        self.x_mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.x_scale_ = np.where(scale > 0, scale, 1.0)
        Z = self._standardize(X)
        net = self._network(X.shape[1])
        rng = np.random.default_rng(self.random_state)
        params = self._init(net, rng)
        state = init_state(self.optimizer, self.learning_rate, params)
        n = len(y)
        self.loss_history_ = []
        with threadpool_limits(1), np.errstate(all="ignore"):
            for _ in range(self.epochs):
                order = rng.permutation(n)
                total = 0.0
                for start in range(0, n, self.batch_size):
                    idx = order[start:start + self.batch_size]
                    loss, grads = self._loss_and_grads(net, params, Z[idx], y[idx], rng)
                    params = optimizer_step(state, params, grads)
                    total += loss * len(idx)
                self.loss_history_.append(total / n)
        self.network_ = net
        self.params_ = params
        return self

    def _loss_and_grads(self, net, params, Z, y, rng):
        out, caches = forward_train(net, params, Z[:, None, None, :], rng)
        pred = sigmoid(out[:, 0])
        diff = pred - y
        loss = float(np.mean(diff * diff)) + self.l2_coeff * sum(float(np.sum(k * k)) for k in params.kernels)
        dout = (2.0 / len(y)) * diff * pred * (1.0 - pred)
        grads = backward(net, params, caches, dout[:, None])
        if self.l2_coeff:
            grads = ParameterSet(
                [g + 2.0 * self.l2_coeff * k for g, k in zip(grads.kernels, params.kernels)], grads.biases
            )
        if not np.isfinite(loss) or not grads.all_finite():
            raise InstabilityError("non-finite loss or gradient while fitting")
        return loss, grads

    def _standardize(self, X):
        return (X - self.x_mean_) / self.x_scale_

    def _predict_raw(self, X):
        Z = self._standardize(X)
        out, _ = forward_train(self.network_, self.params_, Z[:, None, None, :])
        return sigmoid(out[:, 0])

    def _state(self) -> dict:
        return {
            "x_mean": self.x_mean_.tolist(),
            "x_scale": self.x_scale_.tolist(),
            "kernels": [k.tolist() for k in self.params_.kernels],
            "biases": [b.tolist() for b in self.params_.biases],
        }

    def _set_state(self, state: dict) -> None:
        self.x_mean_ = np.asarray(state["x_mean"], dtype=np.float64)
        self.x_scale_ = np.asarray(state["x_scale"], dtype=np.float64)
        kernels = [np.asarray(k, dtype=np.float64).reshape(len(k), -1) for k in state["kernels"]]
        self.params_ = ParameterSet(kernels, [np.asarray(b, dtype=np.float64) for b in state["biases"]])
        self.network_ = self._network(len(self.x_mean_))


class LogitLinearRegressor(DNNRegressor):
    """``x -> sigmoid(<x, theta> + b)`` trained on MSE with mini-batches."""

    kind = "logit_linear"

    def __init__(
        self,
        l2_coeff: float = 1e-6,
        learning_rate: float = 1e-2,
        init_variance: float = 0.01,
        init_type: str = "zeros",
        optimizer: str = "adam",
        batch_size: int = 128,
        epochs: int = 200,
        random_state: int = 0,
    ):
        super().__init__(
            num_layers=0,
            num_units=1,
            dropout_rate=0.0,
            l2_coeff=l2_coeff,
            learning_rate=learning_rate,
            init_variance=init_variance,
            init_type=init_type,
            optimizer=optimizer,
            batch_size=batch_size,
            epochs=epochs,
            random_state=random_state,
        )

    @classmethod
    def _get_param_names(cls):
        return sorted(
            ["l2_coeff", "learning_rate", "init_variance", "init_type", "optimizer", "batch_size", "epochs", "random_state"]
        )

    @property
    def coef_(self) -> Optional[np.ndarray]:
        """Weights on the original (unstandardized) features."""
        return self.params_.kernels[0][:, 0] / self.x_scale_

    @property
    def intercept_(self) -> float:
        theta = self.params_.kernels[0][:, 0]
        return float(self.params_.biases[0][0] - np.sum(theta * self.x_mean_ / self.x_scale_))
