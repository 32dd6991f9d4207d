"""Line recognizer graphs: shared inception-style encoder plus either a
gated recurrent conv stack or a bidirectional LSTM stack, projected to
per-frame logits over the alphabet plus blank.

Desk-scale channel widths are deliberately small; topologies and the
frame-count arithmetic are exact, so models can be scaled up by editing
the spec dict only.
"""

from __future__ import annotations

import io

import numpy as np

from ..alphabet import Alphabet
from ..image import GrayImage, resize_to_height
from .autodiff import Parameter, Tensor, as_tensor, trunc_normal
from . import ops
from .layers import BLSTMStack, Encoder, GRCLBlock, glorot_std, he_std

INPUT_HEIGHT = 40

DESK_ENCODER = [
    {"kind": "conv", "kh": 3, "kw": 3, "stride": [2, 2], "channels": 12},
    {"kind": "pool", "stride": [2, 2], "channels": 16},
    {"kind": "inception", "dims": [6, 8, 8, 6]},
    {"kind": "pool", "stride": [2, 1], "channels": 24},
    {"kind": "inception", "dims": [6, 8, 8, 6]},
    {"kind": "reduce", "kw": 3, "channels": 48},
]


def recognizer_spec(alphabet: list[str], arch: str = "grcl", init_seed: int = 0) -> dict:
    spec = {
        "type": "recognizer",
        "version": 1,
        "arch": arch,
        "alphabet": list(alphabet),
        "init_seed": init_seed,
        "input_height": INPUT_HEIGHT,
        "encoder": [dict(m) for m in DESK_ENCODER],
    }
    if arch == "grcl":
        spec["grcl"] = {"channels": 48, "kernel": 3, "iterations": 2,
                        "gate_mode": "both", "blocks": 2, "mid_stride": 2}
    elif arch == "blstm":
        spec["blstm"] = {"layers": 2, "hidden": 48}
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    return spec


class GRCLStack:
    """Stacked gated recurrent conv blocks with a strided width-reduction
    conv between consecutive blocks."""

    def __init__(self, rng, in_c, cfg: dict, dtype=np.float32):
        self.cfg = cfg
        channels = cfg["channels"]
        self.blocks: list[GRCLBlock] = []
        self.mid: list[tuple[Parameter, Parameter]] = []
        self.mid_stride = int(cfg.get("mid_stride", 2))
        c = in_c
        for i in range(int(cfg.get("blocks", 2))):
            self.blocks.append(GRCLBlock(rng, c, channels, cfg.get("kernel", 3),
                                         cfg.get("iterations", 2),
                                         cfg.get("gate_mode", "both"), dtype))
            c = channels
            if i < int(cfg.get("blocks", 2)) - 1:
                w = Parameter(trunc_normal(rng, (3, c, c), he_std(3 * c), dtype))
                b = Parameter(np.zeros(c, dtype=dtype))
                self.mid.append((w, b))
        self.out_channels = c

    def forward(self, x: Tensor) -> Tensor:
        for i, block in enumerate(self.blocks):
            x = block.forward(x)
            if i < len(self.mid):
                w, b = self.mid[i]
                x = ops.relu6(ops.conv1d(x, w, b, stride=self.mid_stride))
        return x

    def out_width(self, w: int) -> int:
        for _ in self.mid:
            w = -(-w // self.mid_stride)
        return w

    @property
    def stride_w(self) -> int:
        return self.mid_stride ** len(self.mid)

    def named_params(self, prefix: str) -> dict[str, Parameter]:
        out = {}
        for i, block in enumerate(self.blocks):
            out.update(block.named_params(f"{prefix}.block{i}"))
        for i, (w, b) in enumerate(self.mid):
            out[f"{prefix}.mid{i}.w"] = w
            out[f"{prefix}.mid{i}.b"] = b
        return out


class Recognizer:
    def __init__(self, spec: dict, dtype=np.float32):
        self.spec = spec
        self.alphabet = Alphabet(spec["alphabet"])
        rng = np.random.default_rng(spec.get("init_seed", 0))
        self.encoder = Encoder(rng, spec["encoder"], in_h=spec.get("input_height", INPUT_HEIGHT),
                               dtype=dtype)
        if spec["arch"] == "grcl":
            self.sequencer = GRCLStack(rng, self.encoder.out_channels, spec["grcl"], dtype)
        elif spec["arch"] == "blstm":
            cfg = spec["blstm"]
            self.sequencer = BLSTMStack(rng, self.encoder.out_channels,
                                        cfg["hidden"], cfg["layers"], dtype)
        else:
            raise ValueError(f"unknown architecture {spec['arch']!r}")
        n_out = self.alphabet.size
        self.proj_w = Parameter(trunc_normal(rng, (self.sequencer.out_channels, n_out),
                                            glorot_std(self.sequencer.out_channels, n_out), dtype))
        self.proj_b = Parameter(np.zeros(n_out, dtype=dtype))

    @property
    def total_stride(self) -> int:
        seq_stride = getattr(self.sequencer, "stride_w", 1)
        return self.encoder.stride_w * seq_stride

    def out_frames(self, width: int) -> int:
        w = self.encoder.out_width(width)
        if hasattr(self.sequencer, "out_width"):
            w = self.sequencer.out_width(w)
        return w

    def forward_t(self, x: Tensor) -> Tensor:
        seq = self.encoder.forward(x)
        seq = self.sequencer.forward(seq)
        return ops.linear(seq, self.proj_w, self.proj_b)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Inference pass over a (batch, height, width, 1) array."""
        return self.forward_t(as_tensor(x)).data

    def named_params(self) -> dict[str, Parameter]:
        out = self.encoder.named_params("encoder")
        out.update(self.sequencer.named_params("sequencer"))
        out["proj.w"] = self.proj_w
        out["proj.b"] = self.proj_b
        return out

    def num_params(self) -> int:
        return sum(p.data.size for p in self.named_params().values())

    def summary(self, probe_width: int = 128) -> str:
        """Human-readable op list with shapes and the parameter count."""
        buf = io.StringIO()
        h, w, c = self.spec.get("input_height", INPUT_HEIGHT), probe_width, 1
        print(f"input: ({h}, {w}, {c})", file=buf)
        for i, (m, mod) in enumerate(zip(self.spec["encoder"], self.encoder.modules)):
            h, w, c = mod.out_height(h), mod.out_width(w), mod.out_channels
            n = sum(p.data.size for p in mod.named_params("x").values())
            print(f"encoder[{i}] {m['kind']:<10} -> ({h}, {w}, {c})  params={n}", file=buf)
        seq_w = w if not hasattr(self.sequencer, "out_width") else self.sequencer.out_width(w)
        seq_n = sum(p.data.size for p in self.sequencer.named_params("x").values())
        print(f"sequencer {self.spec['arch']:<12} -> ({seq_w}, {self.sequencer.out_channels})  params={seq_n}", file=buf)
        print(f"projection -> ({seq_w}, {self.alphabet.size})  params={self.proj_w.data.size + self.proj_b.data.size}", file=buf)
        print(f"total stride: {self.total_stride}", file=buf)
        print(f"total params: {self.num_params()}", file=buf)
        return buf.getvalue()


def preprocess(img: GrayImage, total_stride: int = 1, dtype=np.float32) -> np.ndarray:
    """Scale to the fixed input height, map luminance to [-1, 1] with
    white at +1, and pad the right edge to a stride multiple."""
    arr = resize_to_height(img.array, INPUT_HEIGHT)
    x = (arr.astype(np.float64) / 127.5 - 1.0).astype(dtype)
    w = x.shape[1]
    if total_stride > 1 and w % total_stride:
        pad = total_stride - w % total_stride
        x = np.pad(x, ((0, 0), (0, pad)), constant_values=1.0)
    return x[:, :, None]
