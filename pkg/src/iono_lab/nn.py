"""Small fully connected network with hand-written backprop and Adam."""

from __future__ import annotations

import numpy as np


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    return (z > 0).astype(z.dtype)


def tanh_grad(z):
    return 1.0 - np.tanh(z) ** 2


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "tanh": (np.tanh, tanh_grad),
}


class MLP:
    """Dense network; hidden layers share one activation, the output is linear.

    Weights are stored as (fan_in, fan_out) so a batch ``x`` of shape
    (n, fan_in) maps through ``x @ W + b``.
    """

    def __init__(self, layer_dims, activation="relu", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_dims = [int(d) for d in layer_dims]
        self.activation = activation
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x, keep=False):
        act, _ = ACTIVATIONS[self.activation]
        a = x
        cache = [x]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < last:
                cache.append(z)
                a = act(z)
                cache.append(a)
            else:
                a = z
        return (a, cache) if keep else a

    __call__ = forward

    def backward(self, cache, dout):
        """Gradients of sum(dout * output) w.r.t. [W0, b0, W1, b1, ...]."""
        _, dact = ACTIVATIONS[self.activation]
        grads = [None] * (2 * len(self.weights))
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[0] if i == 0 else cache[2 * i]
            grads[2 * i] = a_prev.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * dact(cache[2 * i - 1])
        return grads

    def loss_and_grads(self, x, y):
        """Mean squared error over every output element, and its gradients."""
        pred, cache = self.forward(x, keep=True)
        err = pred - y
        n = err.size
        loss = float(np.sum(err * err) / n)
        grads = self.backward(cache, 2.0 * err / n)
        return loss, grads


class Adam:
    def __init__(self, params, lr=0.0025, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
