"""Differentiable ops: elementwise math, matmul, convolutions, pooling,
shape ops, softmax, and an LSTM cell composed from the primitives.

Layout conventions: images are NHWC, sequences are (batch, time,
channels), conv2d weights are (kh, kw, in_c, out_c), conv1d weights are
(k, in_c, out_c). SAME padding follows the ceil(n / stride) rule.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import Tensor, as_tensor


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b), op="add")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def sub(a, b) -> Tensor:
    return add(a, mul(b, -1.0))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b), op="mul")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data @ b.data, parents=(a, b), op="matmul")

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    out._backward = backward
    return out


def linear(x, w, b=None) -> Tensor:
    y = matmul(x, w)
    return add(y, b) if b is not None else y


def relu6(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.clip(x.data, 0.0, 6.0), parents=(x,), op="relu6")

    def backward(g):
        if x.requires_grad:
            mask = (x.data > 0.0) & (x.data < 6.0)
            x.accumulate(g * mask)

    out._backward = backward
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    # keep the output strictly inside (0, 1) even where exp saturates
    info = np.finfo(d.dtype)
    y = np.clip(y.astype(d.dtype), info.tiny, np.nextafter(d.dtype.type(1.0), d.dtype.type(0.0)))
    out = Tensor(y, parents=(x,), op="sigmoid")

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * y * (1.0 - y))

    out._backward = backward
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    out = Tensor(y, parents=(x,), op="tanh")

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * (1.0 - y * y))

    out._backward = backward
    return out


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, parents=(x,), op="softmax")

    def backward(g):
        if x.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            x.accumulate(y * (g - dot))

    out._backward = backward
    return out


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor(y, parents=(x,), op="log_softmax")

    def backward(g):
        if x.requires_grad:
            x.accumulate(g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    out._backward = backward
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors), op="concat")
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                t.accumulate(g[tuple(idx)])
            offset += size

    out._backward = backward
    return out


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape), parents=(x,), op="reshape")

    def backward(g):
        if x.requires_grad:
            x.accumulate(g.reshape(x.data.shape))

    out._backward = backward
    return out


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.transpose(axes), parents=(x,), op="transpose")
    inverse = np.argsort(axes)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g.transpose(inverse))

    out._backward = backward
    return out


def narrow(x, axis: int, start: int, length: int) -> Tensor:
    x = as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = Tensor(x.data[idx], parents=(x,), op="narrow")

    def backward(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[idx] = g
            x.accumulate(full)

    out._backward = backward
    return out


def reduce_sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims), parents=(x,), op="sum")

    def backward(g):
        if x.requires_grad:
            gg = np.asarray(g)
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            x.accumulate(np.broadcast_to(gg, x.data.shape).astype(x.data.dtype, copy=True))

    out._backward = backward
    return out


def reduce_mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


# --- convolutions and pooling ------------------------------------------------


def _same_pads(n: int, k: int, s: int) -> tuple[int, int, int]:
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return total // 2, total - total // 2, out


def conv_out_len(n: int, k: int, s: int, padding: str) -> int:
    if padding == "same":
        return -(-n // s)
    return (n - k) // s + 1


def conv2d(x, w, b=None, stride: tuple[int, int] = (1, 1), padding: str = "same") -> Tensor:
    x, w = as_tensor(x), as_tensor(w)
    bsz, hh, ww_, ic = x.data.shape
    kh, kw, wic, oc = w.data.shape
    if wic != ic:
        raise ValueError(f"conv2d channel mismatch: input {ic}, weight {wic}")
    sh, sw = stride
    if padding == "same":
        pt, pb, oh = _same_pads(hh, kh, sh)
        pl, pr, ow = _same_pads(ww_, kw, sw)
    elif padding == "valid":
        pt = pb = pl = pr = 0
        oh = (hh - kh) // sh + 1
        ow = (ww_ - kw) // sw + 1
    else:
        raise ValueError(f"unknown padding {padding!r}")
    if oh < 1 or ow < 1:
        raise ValueError("conv2d output would be empty")

    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(bsz, oh, ow, kh * kw * ic)
    y = cols @ w.data.reshape(kh * kw * ic, oc)
    parents = (x, w) if b is None else (x, w, as_tensor(b))
    if b is not None:
        y = y + parents[2].data
    out = Tensor(y, parents=parents, op="conv2d")

    def backward(g):
        if len(parents) == 3 and parents[2].requires_grad:
            parents[2].accumulate(g.sum(axis=(0, 1, 2)))
        if w.requires_grad:
            dw = cols.reshape(-1, kh * kw * ic).T @ g.reshape(-1, oc)
            w.accumulate(dw.reshape(w.data.shape))
        if x.requires_grad:
            dcols = (g @ w.data.reshape(kh * kw * ic, oc).T).reshape(bsz, oh, ow, kh, kw, ic)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, i : i + oh * sh : sh, j : j + ow * sw : sw, :] += dcols[:, :, :, i, j, :]
            x.accumulate(dxp[:, pt : pt + hh, pl : pl + ww_, :])

    out._backward = backward
    return out


def conv1d(x, w, b=None, stride: int = 1, padding: str = "same") -> Tensor:
    """1-D convolution along time for (batch, time, channels) sequences."""
    x = as_tensor(x)
    w = as_tensor(w)
    k, ic, oc = w.data.shape
    x4 = reshape(x, (x.data.shape[0], 1, x.data.shape[1], ic))
    w4 = reshape(w, (1, k, ic, oc))
    y = conv2d(x4, w4, b, stride=(1, stride), padding=padding)
    return reshape(y, (y.data.shape[0], y.data.shape[2], oc))


def maxpool2d(x, ksize: tuple[int, int] = (3, 3), stride: tuple[int, int] = (1, 1),
              padding: str = "same") -> Tensor:
    x = as_tensor(x)
    bsz, hh, ww_, c = x.data.shape
    kh, kw = ksize
    sh, sw = stride
    if kh > 1 and kw > 1 and padding == "same":
        # max is separable; two 1-D passes replace the k*k window scan
        return maxpool2d(maxpool2d(x, (kh, 1), (sh, 1), "same"), (1, kw), (1, sw), "same")
    if padding == "same":
        pt, pb, oh = _same_pads(hh, kh, sh)
        pl, pr, ow = _same_pads(ww_, kw, sw)
    else:
        pt = pb = pl = pr = 0
        oh = (hh - kh) // sh + 1
        ow = (ww_ - kw) // sw + 1
    fill = np.finfo(x.data.dtype).min
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)), constant_values=fill)
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    flat = win.reshape(bsz, oh, ow, c, kh * kw)
    idx = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    out = Tensor(y, parents=(x,), op="maxpool2d")

    def backward(g):
        if not x.requires_grad:
            return
        dxp = np.zeros_like(xp)
        for j in range(kh * kw):
            contrib = np.where(idx == j, g, 0)
            dxp[:, j // kw : j // kw + oh * sh : sh,
                j % kw : j % kw + ow * sw : sw, :] += contrib
        x.accumulate(dxp[:, pt : pt + hh, pl : pl + ww_, :])

    out._backward = backward
    return out


def avgpool2d(x, ksize: tuple[int, int] = (3, 3), stride: tuple[int, int] = (1, 1),
              padding: str = "same") -> Tensor:
    """Average pooling; padded positions count toward the fixed divisor."""
    x = as_tensor(x)
    bsz, hh, ww_, c = x.data.shape
    kh, kw = ksize
    sh, sw = stride
    if padding == "same":
        pt, pb, oh = _same_pads(hh, kh, sh)
        pl, pr, ow = _same_pads(ww_, kw, sw)
    else:
        pt = pb = pl = pr = 0
        oh = (hh - kh) // sh + 1
        ow = (ww_ - kw) // sw + 1
    xp = np.pad(x.data, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    y = win.mean(axis=(-2, -1))
    out = Tensor(np.ascontiguousarray(y), parents=(x,), op="avgpool2d")

    def backward(g):
        if not x.requires_grad:
            return
        share = g / (kh * kw)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + oh * sh : sh, j : j + ow * sw : sw, :] += share
        x.accumulate(dxp[:, pt : pt + hh, pl : pl + ww_, :])

    out._backward = backward
    return out


def lstm_cell(x, h, c, wx, wh, b) -> tuple[Tensor, Tensor]:
    """One LSTM step built from the primitive ops; gate order i, f, g, o."""
    hidden = h.data.shape[-1]
    gates = add(add(matmul(x, wx), matmul(h, wh)), b)
    i = sigmoid(narrow(gates, -1, 0, hidden))
    f = sigmoid(narrow(gates, -1, hidden, hidden))
    g = tanh(narrow(gates, -1, 2 * hidden, hidden))
    o = sigmoid(narrow(gates, -1, 3 * hidden, hidden))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new
