"""Forward and backward kernels on NCHW numpy arrays.

Every kernel works in the dtype of its inputs (float32 for training,
float64 for gradient checks). Summation order is fixed by the loop nest
and the matrix products, so results do not depend on batch scheduling.
"""
from __future__ import annotations

import numpy as np


def conv_output_size(n: int, k: int, stride: int, pad: int) -> int:
    span = n + 2 * pad - k
    if span < 0 or span % stride:
        raise ValueError(
            f"size {n} with kernel {k}, stride {stride}, pad {pad} does not tile evenly"
        )
    return span // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int, ho: int, wo: int) -> np.ndarray:
    """Patches as ``(n, c*kh*kw, ho*wo)``; row order (c, kh, kw) matches
    ``weight.reshape(K, -1)``."""
    n, c, h, w = x.shape
    if kh == kw == 1 and stride == 1 and pad == 0:
        return x.reshape(n, c, h * w)
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, :, pad:pad + h, pad:pad + w] = x
    else:
        xp = x
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * kh * kw, ho * wo)


def conv2d_forward(x, weight, bias, stride: int = 1, pad: int = 0):
    """Cross-correlation; ``bias`` may be None. Returns ``(out, cache)``."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"expected 4D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    k, cw, kh, kw = weight.shape
    if c != cw:
        raise ValueError(f"input has {c} channels but weight expects {cw}")
    if bias is not None and bias.shape != (k,):
        raise ValueError(f"bias shape {bias.shape} does not match {k} output channels")
    ho = conv_output_size(h, kh, stride, pad)
    wo = conv_output_size(w, kw, stride, pad)
    cols = _im2col(x, kh, kw, stride, pad, ho, wo)
    out = np.matmul(weight.reshape(k, -1), cols)
    if bias is not None:
        out += bias[:, None]
    return out.reshape(n, k, ho, wo), (x.shape, cols, weight, stride, pad)


def conv2d_backward(grad_out, cache):
    """Returns ``(grad_x, grad_weight, grad_bias)``."""
    x_shape, cols, weight, stride, pad = cache
    n, c, h, w = x_shape
    k, _, kh, kw = weight.shape
    if grad_out.ndim != 4 or grad_out.shape[:2] != (n, k):
        raise ValueError(f"grad_out shape {grad_out.shape} does not match forward output")
    ho, wo = grad_out.shape[2:]
    if ho * wo != cols.shape[2]:
        raise ValueError(f"grad_out spatial shape {(ho, wo)} does not match forward output")
    g = grad_out.reshape(n, k, ho * wo)
    grad_w = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
    grad_b = g.sum(axis=(0, 2))
    dcols = np.matmul(weight.reshape(k, -1).T, g)
    if kh == kw == 1 and stride == 1 and pad == 0:
        return dcols.reshape(n, c, h, w), grad_w, grad_b
    dcols = dcols.reshape(n, c, kh, kw, ho, wo)
    gxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=grad_out.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += dcols[:, :, i, j]
    grad_x = gxp[:, :, pad:pad + h, pad:pad + w] if pad else gxp
    return np.ascontiguousarray(grad_x), grad_w, grad_b


def batchnorm_forward(x, gamma, beta, running_mean, running_var, *, training: bool,
                      momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel batch norm over (N, H, W).

    In training mode ``running_mean``/``running_var`` are updated in place
    (``running_var`` tracks the unbiased batch variance). Inference mode
    reads them and mutates nothing.
    """
    n, c, h, w = x.shape
    if gamma.shape != (c,):
        raise ValueError(f"gamma shape {gamma.shape} does not match {c} channels")
    m = n * h * w
    if training:
        if m < 2:
            raise ValueError(f"batch norm in training mode needs N*H*W >= 2, got {m}")
        mean = x.mean(axis=(0, 2, 3))
        xc = x - mean[None, :, None, None]
        var = (xc * xc).mean(axis=(0, 2, 3))
        running_mean *= 1 - momentum
        running_mean += momentum * mean
        running_var *= 1 - momentum
        running_var += momentum * var * (m / (m - 1))
    else:
        xc = x - running_mean[None, :, None, None]
        var = running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std[None, :, None, None]
    out = xhat * gamma[None, :, None, None] + beta[None, :, None, None]
    return out.astype(x.dtype, copy=False), (xhat.astype(x.dtype, copy=False), inv_std, gamma)


def batchnorm_backward(grad_out, cache):
    """Training-mode gradient. Returns ``(grad_x, grad_gamma, grad_beta)``."""
    xhat, inv_std, gamma = cache
    if grad_out.shape != xhat.shape:
        raise ValueError(f"grad_out shape {grad_out.shape} != {xhat.shape}")
    n, c, h, w = xhat.shape
    m = n * h * w
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    scale = (gamma * inv_std / m)[None, :, None, None]
    grad_x = scale * (
        m * grad_out - grad_beta[None, :, None, None] - xhat * grad_gamma[None, :, None, None]
    )
    return grad_x.astype(grad_out.dtype, copy=False), grad_gamma, grad_beta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(grad_out, mask):
    return grad_out * mask


def _pool_views(x):
    # window members in row-major order
    return (x[:, :, 0::2, 0::2], x[:, :, 0::2, 1::2], x[:, :, 1::2, 0::2], x[:, :, 1::2, 1::2])


def maxpool2x2_forward(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"2x2 max-pool needs even spatial dims, got {h}x{w}")
    a, b, cc, d = _pool_views(x)
    return np.maximum(np.maximum(a, b), np.maximum(cc, d)), x


def maxpool2x2_backward(grad_out, x):
    """Route each gradient to the first maximum of its window (row-major)."""
    a, b, cc, d = _pool_views(x)
    out = np.maximum(np.maximum(a, b), np.maximum(cc, d))
    grad_x = np.zeros(x.shape, dtype=grad_out.dtype)
    taken = np.zeros(out.shape, dtype=bool)
    for view, gview in zip(_pool_views(x), _pool_views(grad_x)):
        hit = (view == out) & ~taken
        gview[hit] = grad_out[hit]
        taken |= hit
    return grad_x


def global_avgpool_forward(x):
    return x.mean(axis=(2, 3)), x.shape


def global_avgpool_backward(grad_out, shape):
    n, c, h, w = shape
    g = grad_out / (h * w)
    return np.broadcast_to(g[:, :, None, None], shape).copy()


def linear_forward(x, weight, bias):
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"input shape {x.shape} does not match weight {weight.shape}")
    return x @ weight.T + bias, x


def linear_backward(grad_out, x, weight):
    """Returns ``(grad_x, grad_weight, grad_bias)``."""
    return grad_out @ weight, grad_out.T @ x, grad_out.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to ``logits``."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in 0..{k - 1}")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))
    grad = np.exp(z - logsum[:, None])
    grad[rows, labels] -= 1
    grad /= n
    return loss, grad


def sgd_step(params, grads, lr: float) -> None:
    """In-place ``p -= lr * g`` for matching dicts (or sequences) of arrays."""
    if isinstance(params, dict):
        if params.keys() != grads.keys():
            raise ValueError("parameter and gradient names differ")
        pairs = [(params[k], grads[k], k) for k in params]
    else:
        pairs = [(p, g, i) for i, (p, g) in enumerate(zip(params, grads, strict=True))]
    for p, g, name in pairs:
        if p.shape != g.shape:
            raise ValueError(f"{name}: parameter shape {p.shape} != gradient shape {g.shape}")
    for p, g, _ in pairs:
        p -= np.asarray(lr * g, dtype=p.dtype)
