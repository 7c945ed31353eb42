"""Layer primitives with analytic gradients.

Sequence tensors are channels-last, shape ``(batch, length, channels)``; dense
tensors are ``(batch, features)``.  Every ``*_forward`` returns the output and a
cache that the matching ``*_backward`` consumes.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

KERNEL = 5
PAD = KERNEL // 2
POOL = 2
BN_EPS = 1e-5


def _check(name, arr, shape):
    if arr.ndim != len(shape) or any(s is not None and a != s for a, s in zip(arr.shape, shape)):
        expected = tuple("*" if s is None else s for s in shape)
        raise ValueError(f"{name}: expected shape {expected}, got {arr.shape}")


def conv_forward(x, W, b):
    """Length-preserving 1-D cross-correlation: kernel 5, stride 1, zero padding 2.

    ``W`` has shape ``(5, c_in, c_out)``.
    """
    _check("conv weight", W, (KERNEL, None, None))
    _check("conv input", x, (None, None, W.shape[1]))
    B, L, C = x.shape
    xp = np.pad(x, ((0, 0), (PAD, PAD), (0, 0)))
    # channels-last: the 5 x C window at each position is contiguous in xp
    cols = as_strided(xp, (B, L, KERNEL * C), (xp.strides[0], xp.strides[1], xp.strides[2]), writeable=False)
    cols = cols.reshape(B * L, KERNEL * C)
    y = cols @ W.reshape(KERNEL * C, -1) + b
    return y.reshape(B, L, -1), (cols, x.shape, W)


def conv_backward(dy, cache):
    cols, (B, L, C), W = cache
    dy2 = dy.reshape(B * L, -1)
    dW = (cols.T @ dy2).reshape(W.shape)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ W.reshape(KERNEL * C, -1).T).reshape(B, L, KERNEL, C)
    dxp = np.zeros((B, L + 2 * PAD, C))
    for k in range(KERNEL):
        dxp[:, k:k + L] += dcols[:, :, k]
    return dxp[:, PAD:PAD + L], dW, db


def bn_forward(x, gamma, beta, running_mean, running_var, train, momentum=0.9):
    """Per-channel batch normalization over all axes but the last.

    In training mode the running statistics are updated in place with
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    C = x.shape[-1]
    _check("batch-norm scale", gamma, (C,))
    axes = tuple(range(x.ndim - 1))
    if train:
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)
        count = x.size // C
        running_mean *= momentum
        running_mean += (1 - momentum) * mu
        running_var *= momentum
        running_var += (1 - momentum) * var * count / max(count - 1, 1)
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv, gamma, axes, train)


def bn_backward(dy, cache):
    xhat, inv, gamma, axes, train = cache
    dgamma = np.sum(dy * xhat, axis=axes)
    dbeta = np.sum(dy, axis=axes)
    dxhat = dy * gamma
    if not train:
        return dxhat * inv, dgamma, dbeta
    count = dy.size // dy.shape[-1]
    dx = inv / count * (count * dxhat - dxhat.sum(axis=axes) - xhat * np.sum(dxhat * xhat, axis=axes))
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dy, mask):
    return dy * mask


def pool_forward(x, cache: bool = True):
    """Max-pool width 2, stride 2 along the length axis; an odd tail is dropped.

    With ``cache=False`` only the output is computed (cache is ``None``).
    """
    B, L, C = x.shape
    if L < POOL:
        raise ValueError(f"max-pool: length {L} is shorter than the pool width")
    Lo = L // POOL
    if not cache:
        return np.maximum.reduce([x[:, j:Lo * POOL:POOL] for j in range(POOL)]), None
    win = x[:, :Lo * POOL].reshape(B, Lo, POOL, C)
    arg = win.argmax(axis=2)
    y = np.take_along_axis(win, arg[:, :, None], axis=2)[:, :, 0]
    return y, (arg, x.shape)


def pool_backward(dy, cache):
    arg, (B, L, C) = cache
    Lo = dy.shape[1]
    dwin = np.zeros((B, Lo, POOL, C))
    np.put_along_axis(dwin, arg[:, :, None], dy[:, :, None], axis=2)
    dx = np.zeros((B, L, C))
    dx[:, :Lo * POOL] = dwin.reshape(B, Lo * POOL, C)
    return dx


def dense_forward(x, W, b):
    _check("dense input", x, (None, W.shape[0]))
    return x @ W + b, (x, W)


def dense_backward(dy, cache):
    x, W = cache
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)
