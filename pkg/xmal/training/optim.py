"""In-place optimizers with decoupled weight decay."""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..errors import ConfigError


class Optimizer:
    def __init__(self, params: Dict[str, np.ndarray], learning_rate: float, weight_decay: float = 0.0) -> None:
        if learning_rate < 0 or weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be nonnegative")
        self.params = params
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.steps = 0

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        self.steps += 1
        for name, param in self.params.items():
            param *= 1.0 - self.learning_rate * self.weight_decay
            param -= self.learning_rate * self._direction(name, grads[name])

    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(
        self, params: Dict[str, np.ndarray], learning_rate: float, weight_decay: float = 0.0, momentum: float = 0.0
    ) -> None:
        super().__init__(params, learning_rate, weight_decay)
        if not 0 <= momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(param) for name, param in params.items()}

    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        if not self.momentum:
            return grad
        velocity = self.velocity[name]
        velocity *= self.momentum
        velocity += grad
        return velocity


class AdamW(Optimizer):
    def __init__(
        self,
        params: Dict[str, np.ndarray],
        learning_rate: float,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        super().__init__(params, learning_rate, weight_decay)
        self.betas = betas
        self.eps = eps
        self.first = {name: np.zeros_like(param) for name, param in params.items()}
        self.second = {name: np.zeros_like(param) for name, param in params.items()}

    def _direction(self, name: str, grad: np.ndarray) -> np.ndarray:
        beta1, beta2 = self.betas
        first = self.first[name]
        second = self.second[name]
        first *= beta1
        first += (1 - beta1) * grad
        second *= beta2
        second += (1 - beta2) * grad**2
        first_hat = first / (1 - beta1**self.steps)
        second_hat = second / (1 - beta2**self.steps)
        return first_hat / (np.sqrt(second_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adamw": AdamW}


def build_optimizer(
    name: str, params: Dict[str, np.ndarray], learning_rate: float, weight_decay: float, momentum: float = 0.0
) -> Optimizer:
    if name == "sgd":
        return SGD(params, learning_rate, weight_decay, momentum=momentum)
    if name == "adamw":
        return AdamW(params, learning_rate, weight_decay)
    raise ConfigError(f"Unknown optimizer {name!r}; available: {', '.join(OPTIMIZERS)}")
