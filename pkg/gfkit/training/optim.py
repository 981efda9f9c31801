"""
Plain stochastic gradient descent and a reduce-on-plateau learning rate
schedule monitoring a metric which should decrease.
"""

import logging
import math
from typing import Iterable, List, Optional

import numpy as np

from gfkit.exceptions import ConfigurationError
from gfkit.nn.module import Parameter


class SGD:
    """
    Update every parameter with ``p <- p - lr * (grad + weight_decay * p)``,
    optionally with heavy-ball momentum.
    """

    def __init__(
        self,
        parameters: Iterable[Parameter],
        lr: float,
        momentum: float = 0.0,
        weight_decay: float = 0.0,
    ) -> None:
        if lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")

        if not 0.0 <= momentum < 1.0:
            raise ConfigurationError(f"momentum must be within [0, 1), got {momentum}")

        self.parameters: List[Parameter] = list(parameters)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: List[Optional[np.ndarray]] = [None] * len(self.parameters)

    def zero_grad(self) -> None:
        for parameter in self.parameters:
            parameter.zero_grad()

    def step(self) -> None:
        for index, parameter in enumerate(self.parameters):
            if parameter.grad is None:
                continue

            update = parameter.grad

            if self.weight_decay:
                update = update + self.weight_decay * parameter.data

            if self.momentum:
                velocity = self.velocity[index]

                if velocity is not None:
                    update = self.momentum * velocity + update

                self.velocity[index] = update

            parameter.data -= self.lr * update


class ReduceLROnPlateau:
    """
    Multiply the learning rate of an optimizer by ``factor`` once the
    monitored metric has not improved for ``patience`` consecutive steps.
    The rate is recomputed from the base rate, so after ``k`` reductions it
    equals ``base_lr * factor ** k``.

    Example usage:

    .. code-block:: python

        >>> scheduler = ReduceLROnPlateau(optimizer, factor=0.66, patience=10)
        >>> for epoch in range(epochs):
        >>>     scheduler.step(validation_mde)
    """

    def __init__(
        self,
        optimizer: SGD,
        factor: float = 0.66,
        patience: int = 10,
        min_lr: float = 0.0,
    ) -> None:
        if not 0.0 < factor < 1.0:
            raise ConfigurationError(f"factor must be within (0, 1), got {factor}")

        if patience < 0:
            raise ConfigurationError(f"patience must not be negative, got {patience}")

        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.base_lr = optimizer.lr
        self.reductions = 0
        self.best = math.inf
        self.bad_steps = 0

    def step(self, metric: float) -> bool:
        """
        Record the metric of one epoch.

        :return: Returns True if the learning rate was reduced
        :rtype: bool
        """

        if metric < self.best:
            self.best = metric
            self.bad_steps = 0
            return False

        self.bad_steps += 1

        if self.bad_steps < self.patience:
            return False

        candidate = self.base_lr * self.factor ** (self.reductions + 1)
        self.bad_steps = 0

        if candidate < self.min_lr:
            return False

        self.reductions += 1
        self.optimizer.lr = candidate
        logging.info("Learning rate reduced to %g", candidate)
        return True
