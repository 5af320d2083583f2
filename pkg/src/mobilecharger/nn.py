"""Minimal layer kernels with hand-written backward passes.

Tensors are plain float64 numpy arrays in NCHW layout. Each layer keeps its
parameters and gradients in dicts keyed by short names ("weight", "bias",
"gamma", "beta") and caches whatever its backward pass needs.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    params: dict
    grads: dict

    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError


class Conv2D(Layer):
    """Valid (unpadded) stride-1 convolution via im2col."""

    def __init__(self, c_in, c_out, k=3, rng=None):
        super().__init__()
        self.c_in, self.c_out, self.k = c_in, c_out, k
        fan_in, fan_out = c_in * k * k, c_out * k * k
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["weight"] = glorot_uniform(rng, (c_out, c_in, k, k), fan_in, fan_out)
        self.params["bias"] = np.zeros(c_out)

    def forward(self, x, train=False):
        n, c, h, w = x.shape
        k = self.k
        ho, wo = h - k + 1, w - k + 1
        win = sliding_window_view(x, (k, k), axis=(2, 3))  # n, c, ho, wo, k, k
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        wm = self.params["weight"].reshape(self.c_out, -1)
        out = cols @ wm.T + self.params["bias"]
        self._cache = (x.shape, cols)
        return out.reshape(n, ho, wo, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, dout):
        (n, c, h, w), cols = self._cache
        k = self.k
        ho, wo = h - k + 1, w - k + 1
        dm = dout.transpose(0, 2, 3, 1).reshape(-1, self.c_out)
        self.grads["weight"] = (dm.T @ cols).reshape(self.params["weight"].shape)
        self.grads["bias"] = dm.sum(axis=0)
        wm = self.params["weight"].reshape(self.c_out, -1)
        dcols = (dm @ wm).reshape(n, ho, wo, c, k, k)
        dx = np.zeros((n, c, h, w))
        for i in range(k):
            for j in range(k):
                dx[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dx


class BatchNorm2D(Layer):
    """Per-channel batch norm over (N, H, W)."""

    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        # gradient checks need batch statistics without touching the buffers
        self.track_stats = True

    def forward(self, x, train=False):
        g = self.params["gamma"][None, :, None, None]
        b = self.params["beta"][None, :, None, None]
        if not train:
            mean = self.running_mean[None, :, None, None]
            var = self.running_var[None, :, None, None]
            return g * (x - mean) / np.sqrt(var + self.eps) + b
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        if self.track_stats:
            m = x.shape[0] * x.shape[2] * x.shape[3]
            unbiased = var * m / max(m - 1, 1)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        self._cache = (xhat, inv_std)
        return g * xhat + b

    def backward(self, dout):
        xhat, inv_std = self._cache
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        self.grads["gamma"] = (dout * xhat).sum(axis=(0, 2, 3))
        self.grads["beta"] = dout.sum(axis=(0, 2, 3))
        dxhat = dout * self.params["gamma"][None, :, None, None]
        s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        return (inv_std[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class Flatten(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class Linear(Layer):
    def __init__(self, n_in, n_out, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["weight"] = glorot_uniform(rng, (n_out, n_in), n_in, n_out)
        self.params["bias"] = np.zeros(n_out)

    def forward(self, x, train=False):
        self._x = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, dout):
        self.grads["weight"] = dout.T @ self._x
        self.grads["bias"] = dout.sum(axis=0)
        return dout @ self.params["weight"]


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), labels]))
    d = softmax(logits)
    d[np.arange(n), labels] -= 1.0
    return loss, d / n
