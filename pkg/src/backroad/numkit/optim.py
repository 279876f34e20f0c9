"""Adaptive-moment gradient descent over Params objects."""

from __future__ import annotations

import numpy as np

from .layers import Params


class Adam:
    """Per-parameter first/second moment accumulators, updated in place.

    Moments start at zero; the step counter is strictly increasing. After a
    step, gradients of all managed Params are zeroed.
    """

    def __init__(self, params: list[Params], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [{k: np.zeros_like(w) for k, w in p.weights.items()} for p in self.params]
        self.v = [{k: np.zeros_like(w) for k, w in p.weights.items()} for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        b1t = 1.0 - self.beta1 ** self.step_count
        b2t = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            for name in p.names():
                g = p.grads[name]
                m[name] *= self.beta1
                m[name] += (1.0 - self.beta1) * g
                v[name] *= self.beta2
                v[name] += (1.0 - self.beta2) * (g * g)
                mhat = m[name] / b1t
                vhat = v[name] / b2t
                p.weights[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            p.zero_grads()


def optimizer_step(opt: Adam, params: list[Params] | None = None) -> None:
    """Apply one update; ``params`` must match the managed set if given."""
    if params is not None and list(params) != opt.params:
        raise ValueError("optimizer_step called with a different Params set")
    opt.step()
