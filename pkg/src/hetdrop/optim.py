"""Trainable parameters and the Adam update."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Parameter:
    """A named weight matrix with its gradient and Adam moment buffers."""

    __slots__ = ("name", "value", "grad", "m", "v", "t")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        if self.value.ndim != 2:
            raise ValueError("Parameter value must be 2-D")
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.t = 0

    def tensor(self) -> Tensor:
        """Leaf tensor sharing this parameter's value and gradient buffers."""
        leaf = Tensor(self.value, requires_grad=True)
        leaf.grad = self.grad
        return leaf

    def state(self):
        return {"value": self.value.copy(), "m": self.m.copy(), "v": self.v.copy(), "t": self.t}

    def load_state(self, state):
        self.value[...] = state["value"]
        self.m[...] = state["m"]
        self.v[...] = state["v"]
        self.t = state["t"]
        self.grad[...] = 0.0


def glorot_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """One Adam update with bias correction; clears gradients afterwards.

    weight_decay is the coupled L2 form: g <- g + weight_decay * w before
    the moment update.
    """
    for p in params:
        g = p.grad if weight_decay == 0.0 else p.grad + weight_decay * p.value
        p.t += 1
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.t)
        v_hat = p.v / (1.0 - beta2 ** p.t)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad[...] = 0.0
