from __future__ import annotations

from typing import Mapping

import numpy as np

from gazedep.nn.autograd import Tensor


def learning_rate(lr0: float, decay: float, epoch: int) -> float:
    """Time-based decay, ``epoch`` counted from 0."""
    return lr0 / (1.0 + decay * epoch)


class SGD:
    """SGD with classical momentum: v <- m*v - lr*g; theta <- theta + v."""

    def __init__(self, params: Mapping[str, Tensor], lr0: float, decay: float = 0.0, momentum: float = 0.0):
        self.params = params
        self.lr0 = lr0
        self.decay = decay
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, epoch: int) -> float:
        lr = learning_rate(self.lr0, self.decay, epoch)
        for name, p in self.params.items():
            if p.grad is None:
                continue
            v = self.velocity[name]
            v *= self.momentum
            v -= lr * p.grad
            p.data += v
        return lr
