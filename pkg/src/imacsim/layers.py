"""Minimal numpy layer zoo with explicit forward/backward passes.

Used for the full-precision convolution stage and its vanilla FC head.
Batches are channels-first: (N, C, H, W). Each layer caches what its
backward pass needs; parameters and their gradients live on the layer.
"""

from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    """Divergence or other unrecoverable failure inside a training loop."""


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    idx_i = stride * np.repeat(np.arange(h_out), w_out)
    idx_j = stride * np.tile(np.arange(w_out), h_out)
    cols = np.empty((n, h_out * w_out, c * kh * kw), dtype=x.dtype)
    patch = 0
    for di in range(kh):
        for dj in range(kw):
            block = x[:, :, di:di + stride * h_out:stride, dj:dj + stride * w_out:stride]
            cols[:, :, patch::kh * kw] = block.reshape(n, c, -1).transpose(0, 2, 1)
            patch += 1
    return cols, h_out, w_out


def col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, pad: int):
    n, c, h, w = x_shape
    h_p, w_p = h + 2 * pad, w + 2 * pad
    out = np.zeros((n, c, h_p, w_p), dtype=cols.dtype)
    h_out = (h_p - kh) // stride + 1
    w_out = (w_p - kw) // stride + 1
    patch = 0
    for di in range(kh):
        for dj in range(kw):
            block = cols[:, :, patch::kh * kw].transpose(0, 2, 1).reshape(n, c, h_out, w_out)
            out[:, :, di:di + stride * h_out:stride, dj:dj + stride * w_out:stride] += block
            patch += 1
    return out[:, :, pad:pad + h, pad:pad + w] if pad else out


class Layer:
    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(value, gradient) pairs; empty for stateless layers."""
        return []


class Conv2D(Layer):
    def __init__(self, in_channels, out_channels, kernel, stride=1, pad=0, rng=None):
        rng = rng or np.random.default_rng()
        fan_in = in_channels * kernel * kernel
        scale = np.sqrt(2.0 / fan_in)
        self.w = rng.normal(0.0, scale, size=(out_channels, in_channels, kernel, kernel))
        self.b = np.zeros(out_channels)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self.kernel, self.stride, self.pad = kernel, stride, pad

    def forward(self, x):
        self._x_shape = x.shape
        cols, h_out, w_out = im2col(x, self.kernel, self.kernel, self.stride, self.pad)
        self._cols = cols
        out = cols @ self.w.reshape(self.w.shape[0], -1).T + self.b
        self._hw = (h_out, w_out)
        return out.transpose(0, 2, 1).reshape(x.shape[0], -1, h_out, w_out)

    def backward(self, grad):
        n = grad.shape[0]
        h_out, w_out = self._hw
        g = grad.reshape(n, -1, h_out * w_out).transpose(0, 2, 1)  # (N, P, out_c)
        w_mat = self.w.reshape(self.w.shape[0], -1)
        self.dw[...] = np.tensordot(g, self._cols, axes=([0, 1], [0, 1])).reshape(self.w.shape)
        self.db[...] = g.sum(axis=(0, 1))
        dcols = g @ w_mat
        return col2im(dcols, self._x_shape, self.kernel, self.kernel, self.stride, self.pad)

    def parameters(self):
        return [(self.w, self.dw), (self.b, self.db)]


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class MaxPool2D(Layer):
    def __init__(self, size=2):
        self.size = size

    def forward(self, x):
        n, c, h, w = x.shape
        s = self.size
        if h % s or w % s:
            raise ValueError(f"pool size {s} does not divide spatial dims ({h}, {w})")
        view = x.reshape(n, c, h // s, s, w // s, s)
        flat = view.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // s, w // s, s * s)
        self._argmax = flat.argmax(axis=-1)
        self._x_shape = x.shape
        return flat.max(axis=-1)

    def backward(self, grad):
        n, c, h, w = self._x_shape
        s = self.size
        out = np.zeros((n, c, h // s, w // s, s * s), dtype=grad.dtype)
        np.put_along_axis(out, self._argmax[..., None], grad[..., None], axis=-1)
        out = out.reshape(n, c, h // s, w // s, s, s).transpose(0, 1, 2, 4, 3, 5)
        return out.reshape(n, c, h, w)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None):
        rng = rng or np.random.default_rng()
        scale = np.sqrt(2.0 / in_features)
        self.w = rng.normal(0.0, scale, size=(out_features, in_features))
        self.b = np.zeros(out_features)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x):
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, grad):
        self.dw[...] = grad.T @ self._x
        self.db[...] = grad.sum(axis=0)
        return grad @ self.w

    def parameters(self):
        return [(self.w, self.dw), (self.b, self.db)]


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss over the batch and the gradient wrt logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = -np.log(probs[np.arange(n), labels] + 1e-300).mean()
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


class Sequential:
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


class Adam:
    """Adaptive-moment gradient descent over (value, grad) pairs."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p, _ in self.params]
        self.v = [np.zeros_like(p) for p, _ in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        lr_t = self.lr * np.sqrt(1 - self.beta2 ** self.t) / (1 - self.beta1 ** self.t)
        for (p, g), m, v in zip(self.params, self.m, self.v):
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            p -= lr_t * m / (np.sqrt(v) + self.eps)
