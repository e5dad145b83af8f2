"""Fully connected ReLU network with hand-written backprop, and Adam."""
from __future__ import annotations

import numpy as np


class Mlp:
    """Dense layers with ReLU on hidden layers and a linear output.

    Parameters are held in ``self.params`` as ``[W0, b0, W1, b1, ...]`` with
    ``W`` of shape ``(fan_in, fan_out)``.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None, dtype=np.float64):
        self.sizes = [int(s) for s in sizes]
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            if rng is None:
                w = np.zeros((fan_in, fan_out), dtype=dtype)
                b = np.zeros(fan_out, dtype=dtype)
            else:
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
                b = rng.uniform(-bound, bound, size=fan_out).astype(dtype)
            self.params += [w, b]

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x: np.ndarray):
        """Return ``(output, cache)``; the cache holds every layer input."""
        h = x
        cache = [h]
        for k in range(self.n_layers):
            w, b = self.params[2 * k], self.params[2 * k + 1]
            h = h @ w + b
            if k < self.n_layers - 1:
                h = np.maximum(h, 0.0)
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dout: np.ndarray, need_input_grad: bool = False, need_param_grads: bool = True):
        """Gradients of ``sum(dout * output)`` w.r.t. params (and optionally the input)."""
        grads = [None] * len(self.params)
        g = dout
        for k in reversed(range(self.n_layers)):
            if k < self.n_layers - 1:
                g = g * (cache[k + 1] > 0)
            if need_param_grads:
                grads[2 * k] = cache[k].T @ g
                grads[2 * k + 1] = g.sum(axis=0)
            if k > 0 or need_input_grad:
                g = g @ self.params[2 * k].T
        if not need_param_grads:
            return g
        return (grads, g) if need_input_grad else grads

    def copy_from(self, other: "Mlp") -> None:
        for p, q in zip(self.params, other.params):
            p[...] = q

    def polyak(self, other: "Mlp", tau: float) -> None:
        """``self <- tau * other + (1 - tau) * self`` in place."""
        for p, q in zip(self.params, other.params):
            p *= 1.0 - tau
            p += tau * q

    def clone(self) -> "Mlp":
        net = Mlp.__new__(Mlp)
        net.sizes = list(self.sizes)
        net.params = [p.copy() for p in self.params]
        return net

    @property
    def dtype(self):
        return self.params[0].dtype


class Adam:
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, t: int, m, v) -> None:
        self.t = int(t)
        for dst, src in zip(self.m, m):
            dst[...] = src
        for dst, src in zip(self.v, v):
            dst[...] = src
