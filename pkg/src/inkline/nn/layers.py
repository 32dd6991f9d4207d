"""Network building blocks: plain/inception/pool/reduce conv modules,
gated recurrent convolutional blocks, bidirectional LSTM stacks, and the
gate summarizer used by the classifier heads.

Every block exposes ``named_params()`` for the optimizer/checkpointing
and tracks its horizontal stride so frame counts stay an exact function
of input width.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, Tensor, as_tensor, trunc_normal
from . import ops


def he_std(fan_in: int) -> float:
    """Fan-in-scaled init keeps activation magnitude stable through the
    stack; a fixed small sigma vanishes after a few modules."""
    return (2.0 / fan_in) ** 0.5


def glorot_std(fan_in: int, fan_out: int) -> float:
    return (2.0 / (fan_in + fan_out)) ** 0.5


def _ceil_div(n: int, s: int) -> int:
    return -(-n // s)


class ConvLayer:
    def __init__(self, rng, kh, kw, in_c, out_c, stride=(1, 1), activation="relu6",
                 padding="same", dtype=np.float32):
        self.w = Parameter(trunc_normal(rng, (kh, kw, in_c, out_c), he_std(kh * kw * in_c), dtype))
        self.b = Parameter(np.zeros(out_c, dtype=dtype))
        self.stride = stride
        self.padding = padding
        self.activation = activation
        self.out_channels = out_c

    def forward(self, x: Tensor) -> Tensor:
        y = ops.conv2d(x, self.w, self.b, stride=self.stride, padding=self.padding)
        if self.activation == "relu6":
            y = ops.relu6(y)
        return y

    def out_width(self, w: int) -> int:
        return _ceil_div(w, self.stride[1])

    def out_height(self, h: int) -> int:
        if self.padding == "valid":
            return (h - self.w.data.shape[0]) // self.stride[0] + 1
        return _ceil_div(h, self.stride[0])

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class InceptionModule:
    """Four parallel branches (1x1, 3x3, 5x5, avgpool+1x1), concatenated."""

    def __init__(self, rng, in_c, dims: tuple[int, int, int, int], dtype=np.float32):
        d1, d2, d3, d4 = dims
        self.b1 = ConvLayer(rng, 1, 1, in_c, d1, dtype=dtype)
        self.b2 = ConvLayer(rng, 3, 3, in_c, d2, dtype=dtype)
        self.b3 = ConvLayer(rng, 5, 5, in_c, d3, dtype=dtype)
        self.b4 = ConvLayer(rng, 1, 1, in_c, d4, dtype=dtype)
        self.out_channels = d1 + d2 + d3 + d4

    def forward(self, x: Tensor) -> Tensor:
        pooled = ops.avgpool2d(x, (3, 3), (1, 1), "same")
        return ops.concat(
            [self.b1.forward(x), self.b2.forward(x), self.b3.forward(x), self.b4.forward(pooled)],
            axis=-1,
        )

    def out_width(self, w: int) -> int:
        return w

    def out_height(self, h: int) -> int:
        return h

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        out = {}
        for name, layer in (("b1", self.b1), ("b2", self.b2), ("b3", self.b3), ("b4", self.b4)):
            out.update(layer.named_params(f"{prefix}.{name}"))
        return out


class PoolModule:
    """3x3 stride-1 max pooling followed by a strided conv."""

    def __init__(self, rng, in_c, out_c, stride=(2, 2), dtype=np.float32):
        self.conv = ConvLayer(rng, 3, 3, in_c, out_c, stride=stride, dtype=dtype)
        self.out_channels = out_c

    def forward(self, x: Tensor) -> Tensor:
        return self.conv.forward(ops.maxpool2d(x, (3, 3), (1, 1), "same"))

    def out_width(self, w: int) -> int:
        return self.conv.out_width(w)

    def out_height(self, h: int) -> int:
        return self.conv.out_height(h)

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return self.conv.named_params(f"{prefix}.conv")


class HeightReduce:
    """Full-height conv (valid vertically, same horizontally) collapsing
    the spatial height to 1 so the map becomes a frame sequence."""

    def __init__(self, rng, in_h, kw, in_c, out_c, dtype=np.float32):
        self.conv = ConvLayer(rng, in_h, kw, in_c, out_c, stride=(1, 1),
                              padding="valid", dtype=dtype)
        self.kw = kw
        self.out_channels = out_c

    def forward(self, x: Tensor) -> Tensor:
        pad = self.kw // 2
        if pad:
            b, h, w, c = x.data.shape
            zeros = as_tensor(np.zeros((b, h, pad, c), dtype=x.data.dtype))
            x = ops.concat([zeros, x, zeros], axis=2)
        return self.conv.forward(x)

    def out_width(self, w: int) -> int:
        return w

    def out_height(self, h: int) -> int:
        return 1

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return self.conv.named_params(f"{prefix}.conv")


class GRCLBlock:
    """Gated recurrent conv block over (batch, time, channels) sequences.

    The shared feed conv is applied ``iterations`` times in total; after
    the first plain application, each further iteration mixes in a
    recurrent conv of the previous state and is modulated by a sigmoid
    gate. ``gate_mode`` selects what the gate sees: the block input, the
    previous state, or both.
    """

    def __init__(self, rng, in_c, out_c, kernel=3, iterations=2, gate_mode="both",
                 dtype=np.float32):
        if iterations < 1:
            raise ValueError("iterations must be at least 1")
        if gate_mode not in ("both", "input", "state"):
            raise ValueError(f"unknown gate mode {gate_mode!r}")
        self.feed_w = Parameter(trunc_normal(rng, (kernel, in_c, out_c), he_std(kernel * in_c), dtype))
        self.feed_b = Parameter(np.zeros(out_c, dtype=dtype))
        self.rec_w = Parameter(trunc_normal(rng, (kernel, out_c, out_c), he_std(kernel * out_c), dtype))
        self.gate_in_w = Parameter(trunc_normal(rng, (kernel, in_c, out_c), glorot_std(kernel * in_c, out_c), dtype))
        self.gate_rec_w = Parameter(trunc_normal(rng, (kernel, out_c, out_c), glorot_std(kernel * out_c, out_c), dtype))
        self.gate_b = Parameter(np.zeros(out_c, dtype=dtype))
        self.iterations = iterations
        self.gate_mode = gate_mode
        self.out_channels = out_c

    def forward(self, x: Tensor) -> Tensor:
        feed = ops.conv1d(x, self.feed_w, self.feed_b)
        y = ops.relu6(feed)
        for _ in range(self.iterations - 1):
            if self.gate_mode == "both":
                pre = ops.add(ops.conv1d(x, self.gate_in_w), ops.conv1d(y, self.gate_rec_w))
            elif self.gate_mode == "input":
                pre = ops.conv1d(x, self.gate_in_w)
            else:
                pre = ops.conv1d(y, self.gate_rec_w)
            gate = ops.sigmoid(ops.add(pre, self.gate_b))
            y = ops.mul(ops.relu6(ops.add(feed, ops.conv1d(y, self.rec_w))), gate)
        return y

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return {
            f"{prefix}.feed_w": self.feed_w,
            f"{prefix}.feed_b": self.feed_b,
            f"{prefix}.rec_w": self.rec_w,
            f"{prefix}.gate_in_w": self.gate_in_w,
            f"{prefix}.gate_rec_w": self.gate_rec_w,
            f"{prefix}.gate_b": self.gate_b,
        }


class LSTMLayer:
    """Unidirectional LSTM scanned over time (optionally reversed)."""

    def __init__(self, rng, in_c, hidden, reverse=False, dtype=np.float32):
        self.wx = Parameter(trunc_normal(rng, (in_c, 4 * hidden), (1.0 / in_c) ** 0.5, dtype))
        self.wh = Parameter(trunc_normal(rng, (hidden, 4 * hidden), (1.0 / hidden) ** 0.5, dtype))
        self.b = Parameter(np.zeros(4 * hidden, dtype=dtype))
        self.hidden = hidden
        self.reverse = reverse

    def forward(self, x: Tensor) -> Tensor:
        bsz, frames, _ = x.data.shape
        dtype = x.data.dtype
        h = as_tensor(np.zeros((bsz, self.hidden), dtype=dtype))
        c = as_tensor(np.zeros((bsz, self.hidden), dtype=dtype))
        order = range(frames - 1, -1, -1) if self.reverse else range(frames)
        outs: list[Tensor | None] = [None] * frames
        for t in order:
            xt = ops.reshape(ops.narrow(x, 1, t, 1), (bsz, x.data.shape[2]))
            h, c = ops.lstm_cell(xt, h, c, self.wx, self.wh, self.b)
            outs[t] = ops.reshape(h, (bsz, 1, self.hidden))
        return ops.concat(outs, axis=1)

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.b": self.b}


class BLSTMStack:
    def __init__(self, rng, in_c, hidden, layers, dtype=np.float32):
        if layers < 1:
            raise ValueError("need at least one layer")
        self.layers: list[tuple[LSTMLayer, LSTMLayer]] = []
        c = in_c
        for _ in range(layers):
            fwd = LSTMLayer(rng, c, hidden, reverse=False, dtype=dtype)
            bwd = LSTMLayer(rng, c, hidden, reverse=True, dtype=dtype)
            self.layers.append((fwd, bwd))
            c = 2 * hidden
        self.out_channels = c

    def forward(self, x: Tensor) -> Tensor:
        for fwd, bwd in self.layers:
            x = ops.concat([fwd.forward(x), bwd.forward(x)], axis=-1)
        return x

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        out = {}
        for i, (fwd, bwd) in enumerate(self.layers):
            out.update(fwd.named_params(f"{prefix}.l{i}.fwd"))
            out.update(bwd.named_params(f"{prefix}.l{i}.bwd"))
        return out


class GateSummarizer:
    """Gated sum pooling over frames followed by a linear classifier.

    Per frame, a sigmoid gate and a value vector are computed from the
    same input; the sequence summary is the gated sum, so frames whose
    gates are zero contribute nothing.
    """

    def __init__(self, rng, in_c, summary_dim, n_classes, dtype=np.float32):
        std = glorot_std(in_c, summary_dim)
        self.gate_w = Parameter(trunc_normal(rng, (in_c, summary_dim), std, dtype))
        self.gate_b = Parameter(np.zeros(summary_dim, dtype=dtype))
        self.val_w = Parameter(trunc_normal(rng, (in_c, summary_dim), std, dtype))
        self.val_b = Parameter(np.zeros(summary_dim, dtype=dtype))
        self.out_w = Parameter(trunc_normal(rng, (summary_dim, n_classes), glorot_std(summary_dim, n_classes), dtype))
        self.out_b = Parameter(np.zeros(n_classes, dtype=dtype))
        self.n_classes = n_classes

    def summarize(self, seq: Tensor, mask: np.ndarray | None = None) -> Tensor:
        gates = ops.sigmoid(ops.linear(seq, self.gate_w, self.gate_b))
        values = ops.linear(seq, self.val_w, self.val_b)
        gated = ops.mul(gates, values)
        if mask is not None:
            gated = ops.mul(gated, as_tensor(mask.astype(seq.data.dtype)))
        return ops.reduce_sum(gated, axis=1)

    def forward(self, seq: Tensor, mask: np.ndarray | None = None) -> Tensor:
        return ops.linear(self.summarize(seq, mask), self.out_w, self.out_b)

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        return {
            f"{prefix}.gate_w": self.gate_w,
            f"{prefix}.gate_b": self.gate_b,
            f"{prefix}.val_w": self.val_w,
            f"{prefix}.val_b": self.val_b,
            f"{prefix}.out_w": self.out_w,
            f"{prefix}.out_b": self.out_b,
        }


class Encoder:
    """Inception-style conv stack ending in a height collapse; emits
    (batch, frames, channels) sequences."""

    def __init__(self, rng, config: list[dict], in_h: int = 40, dtype=np.float32):
        self.config = config
        self.in_h = in_h
        self.modules = []
        h, c = in_h, 1
        for m in config:
            kind = m["kind"]
            if kind == "conv":
                mod = ConvLayer(rng, m.get("kh", 3), m.get("kw", 3), c, m["channels"],
                                stride=tuple(m.get("stride", (1, 1))), dtype=dtype)
            elif kind == "pool":
                mod = PoolModule(rng, c, m["channels"], stride=tuple(m.get("stride", (2, 2))), dtype=dtype)
            elif kind == "inception":
                mod = InceptionModule(rng, c, tuple(m["dims"]), dtype=dtype)
            elif kind == "reduce":
                mod = HeightReduce(rng, h, m.get("kw", 3), c, m["channels"], dtype=dtype)
            else:
                raise ValueError(f"unknown encoder module kind {kind!r}")
            self.modules.append(mod)
            h = mod.out_height(h)
            c = mod.out_channels
        if h != 1:
            raise ValueError(f"encoder config leaves height {h}, expected 1")
        self.out_channels = c

    def forward(self, x: Tensor) -> Tensor:
        for mod in self.modules:
            x = mod.forward(x)
        b, _, w, c = x.data.shape
        return ops.reshape(x, (b, w, c))

    def out_width(self, w: int) -> int:
        for mod in self.modules:
            w = mod.out_width(w)
        return w

    @property
    def stride_w(self) -> int:
        s = 1
        for mod in self.modules:
            if hasattr(mod, "stride"):
                s *= mod.stride[1]
            elif hasattr(mod, "conv"):
                s *= mod.conv.stride[1]
        return s

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        out = {}
        for i, mod in enumerate(self.modules):
            out.update(mod.named_params(f"{prefix}.m{i}"))
        return out
