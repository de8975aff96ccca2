"""Shared pieces for the small fully-connected networks: smooth activations,
weight initialization, and an Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid  # noqa: F401  (re-exported)


def softplus(x):
    # log(1 + exp(x)) without overflow for large |x|.
    return np.logaddexp(0.0, x)


def init_affine_stack(widths, gen):
    """Glorot-normal weights and zero biases for consecutive width pairs."""
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(scale * gen.standard_normal((fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


class Adam:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr):
        """Update params in place from grads at learning rate lr."""
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def schedule_lr(step, total_steps, lr, lr_final=None):
    """Constant learning rate, or linear decay to lr_final when it is set."""
    if lr_final is None or total_steps <= 1:
        return lr
    frac = step / (total_steps - 1)
    return lr + frac * (lr_final - lr)
