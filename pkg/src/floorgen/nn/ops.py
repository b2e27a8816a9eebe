"""Array layers with explicit forward/backward passes.

Every forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient. All functions follow the dtype of their
inputs, so the same code runs in float32 for training and float64 for
finite-difference verification.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


def conv2d(x: np.ndarray, w: np.ndarray):
    """Same-padded stride-1 convolution, odd square kernels, no bias.

    x: (B, Cin, H, W), w: (Cout, Cin, k, k). The im2col matrix is kept in
    the cache because the weight gradient reuses it.
    """
    b, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w or kh != kw or kh % 2 == 0:
        raise DimensionError(f"conv weight {w.shape} incompatible with input {x.shape}")
    pad = kh // 2
    if pad:
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    else:
        xp = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        b * h * wd, cin * kh * kw
    )
    y = cols @ w.reshape(cout, -1).T
    y = y.reshape(b, h, wd, cout).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), (cols, x.shape)


def conv2d_backward(dy: np.ndarray, w: np.ndarray, cache):
    cols, x_shape = cache
    b, cin, h, wd = x_shape
    cout = w.shape[0]
    dy_mat = np.ascontiguousarray(dy.transpose(0, 2, 3, 1)).reshape(b * h * wd, cout)
    dw = (dy_mat.T @ cols).reshape(w.shape)
    # input gradient = same-conv of dy with the flipped, channel-swapped kernel
    w_t = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    dx, _ = conv2d(dy, w_t)
    return dx, dw


def group_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int, eps: float = 1e-5):
    """Normalize over (channels/groups, H, W) per sample and group."""
    b, c, h, w = x.shape
    if c % groups:
        raise DimensionError(f"{c} channels not divisible into {groups} groups")
    xg = x.reshape(b, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv_std).reshape(b, c, h, w)
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, inv_std, gamma, groups)


def group_norm_backward(dy: np.ndarray, cache):
    xhat, inv_std, gamma, groups = cache
    b, c, h, w = dy.shape
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = (dy * gamma[None, :, None, None]).reshape(b, groups, -1)
    xh = xhat.reshape(b, groups, -1)
    m = dxhat.shape[2]
    dx = (
        inv_std
        / m
        * (m * dxhat - dxhat.sum(axis=2, keepdims=True) - xh * (dxhat * xh).sum(axis=2, keepdims=True))
    )
    return dx.reshape(b, c, h, w), dgamma, dbeta


def relu(x: np.ndarray):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(dy: np.ndarray, cache):
    return dy * cache


def maxpool2(x: np.ndarray):
    """2x2 stride-2 max pool; ties go to the first window position."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool needs even dims, got {x.shape}")
    xr = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        b, c, h // 2, w // 2, 4
    )
    idx = xr.argmax(axis=4)
    y = np.take_along_axis(xr, idx[..., None], axis=4)[..., 0]
    return y, (idx, x.shape)


def maxpool2_backward(dy: np.ndarray, cache):
    idx, x_shape = cache
    b, c, h, w = x_shape
    dz = np.zeros((b, c, h // 2, w // 2, 4), dtype=dy.dtype)
    np.put_along_axis(dz, idx[..., None], dy[..., None], axis=4)
    return (
        dz.reshape(b, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h, w)
    )


def upsample2(x: np.ndarray):
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3), x.shape


def upsample2_backward(dy: np.ndarray, cache):
    b, c, h, w = cache
    return dy.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5))


def linear(x: np.ndarray, w: np.ndarray, bias: np.ndarray):
    return x @ w + bias, x


def linear_backward(dy: np.ndarray, w: np.ndarray, cache):
    x = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def softmax_channels(logits: np.ndarray) -> np.ndarray:
    """Softmax over axis 1 of (B, C, H, W), numerically stable."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
