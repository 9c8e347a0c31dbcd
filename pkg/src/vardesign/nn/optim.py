"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """First/second-moment adaptive steps over named parameters.

    Parameters are (name, Tensor) pairs as produced by Net.params(); the
    name is reported when a gradient goes non-finite so a diverging layer
    can be identified from the error alone.
    """

    def __init__(self, params: list[tuple[str, Tensor]], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not params:
            raise ValueError("Adam needs at least one parameter")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = float(beta1), float(beta2), float(eps)
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for _, p in self.params]
        self._v = [np.zeros_like(p.data) for _, p in self.params]

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1t = 1.0 - self.beta1 ** self.step_count
        b2t = 1.0 - self.beta2 ** self.step_count
        for i, (name, p) in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise ArithmeticError(f"non-finite gradient in {name} at step {self.step_count}")
            m, v = self._m[i], self._v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def state(self) -> dict:
        return {"step": self.step_count,
                "m": [m.copy() for m in self._m],
                "v": [v.copy() for v in self._v]}

    def load_state(self, state: dict) -> None:
        self.step_count = int(state["step"])
        for i, (m, v) in enumerate(zip(state["m"], state["v"])):
            self._m[i][...] = m
            self._v[i][...] = v
