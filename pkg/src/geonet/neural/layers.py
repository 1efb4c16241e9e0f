"""Stateful layer wrappers around the functional kernels."""
from __future__ import annotations

import math

import numpy as np

from . import functional as F


class Layer:
    """Base layer: ``params`` and ``grads`` share keys; ``buffers`` hold
    non-learnable state that is checkpointed."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, training: bool = False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def output_shape(self, shape):
        return shape

    def astype(self, dtype):
        for d in (self.params, self.grads, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)
        return self


def _kaiming_uniform(rng, shape, fan_in, dtype, a=0.0):
    # leaky-ReLU gain with slope a; a = 0 is the plain ReLU gain sqrt(2)
    gain = math.sqrt(2.0 / (1.0 + a * a))
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, pad=None,
                 bias=True, *, rng=None, dtype=np.float32):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride = kernel_size, stride
        self.pad = kernel_size // 2 if pad is None else pad
        rng = rng if rng is not None else np.random.default_rng(0)
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.params["weight"] = _kaiming_uniform(rng, shape, in_channels * kernel_size**2, dtype)
        if bias:
            self.params["bias"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x, training=False):
        out, self._cache = F.conv2d_forward(
            x, self.params["weight"], self.params.get("bias"), self.stride, self.pad
        )
        return out

    def backward(self, grad_out):
        gx, gw, gb = F.conv2d_backward(grad_out, self._cache)
        self.grads["weight"] = gw
        if "bias" in self.params:
            self.grads["bias"] = gb
        return gx

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.in_channels:
            raise ValueError(f"conv expects {self.in_channels} channels, got {c}")
        k, s, p = self.kernel_size, self.stride, self.pad
        return (self.out_channels, F.conv_output_size(h, k, s, p), F.conv_output_size(w, k, s, p))


class BatchNorm2d(Layer):
    def __init__(self, channels, momentum=0.1, eps=1e-5, *, dtype=np.float32):
        super().__init__()
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x, training=False):
        out, self._cache = F.batchnorm_forward(
            x, self.params["gamma"], self.params["beta"],
            self.buffers["running_mean"], self.buffers["running_var"],
            training=training, momentum=self.momentum, eps=self.eps,
        )
        return out

    def backward(self, grad_out):
        gx, gg, gb = F.batchnorm_backward(grad_out, self._cache)
        self.grads["gamma"], self.grads["beta"] = gg, gb
        return gx


class ReLU(Layer):
    def forward(self, x, training=False):
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, grad_out):
        return F.relu_backward(grad_out, self._cache)


class MaxPool2x2(Layer):
    def forward(self, x, training=False):
        out, self._cache = F.maxpool2x2_forward(x)
        return out

    def backward(self, grad_out):
        return F.maxpool2x2_backward(grad_out, self._cache)

    def output_shape(self, shape):
        c, h, w = shape
        if h % 2 or w % 2:
            raise ValueError(f"2x2 max-pool needs even spatial dims, got {h}x{w}")
        return (c, h // 2, w // 2)


class GlobalAvgPool(Layer):
    def forward(self, x, training=False):
        out, self._cache = F.global_avgpool_forward(x)
        return out

    def backward(self, grad_out):
        return F.global_avgpool_backward(grad_out, self._cache)

    def output_shape(self, shape):
        return (shape[0],)


class Linear(Layer):
    def __init__(self, in_features, out_features, *, rng=None, dtype=np.float32):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        # small classifier weights keep the untrained softmax near uniform
        self.params["weight"] = _kaiming_uniform(rng, (out_features, in_features), in_features, dtype,
                                                 a=math.sqrt(5.0))
        self.params["bias"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x, training=False):
        out, self._cache = F.linear_forward(x, self.params["weight"], self.params["bias"])
        return out

    def backward(self, grad_out):
        gx, gw, gb = F.linear_backward(grad_out, self._cache, self.params["weight"])
        self.grads["weight"], self.grads["bias"] = gw, gb
        return gx

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ValueError(f"linear expects ({self.in_features},), got {shape}")
        return (self.out_features,)
