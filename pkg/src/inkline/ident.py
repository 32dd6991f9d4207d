"""Dual-head script and style identifier with threshold routing.

One shared inception-style encoder feeds two gate-summarizer heads: a
script head over the configured script classes and a style head over
printed vs handwritten. Routing picks the handwriting engine exactly
when the handwritten probability reaches the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage
from .nn import ops
from .nn.autodiff import Parameter, as_tensor
from .nn.checkpoint import register_builder
from .nn.layers import Encoder, GateSummarizer
from .nn.model import INPUT_HEIGHT, preprocess
from .nn.train import clip_gradients

STYLE_CLASSES = ("printed", "handwritten")

ENGINE_HTR = "HTR"
ENGINE_OCR = "OCR"

DESK_IDENT_ENCODER = [
    {"kind": "conv", "kh": 3, "kw": 3, "stride": [2, 2], "channels": 8},
    {"kind": "pool", "stride": [2, 2], "channels": 12},
    {"kind": "inception", "dims": [4, 6, 6, 4]},
    {"kind": "reduce", "kw": 3, "channels": 32},
]


def identifier_spec(scripts: list[str], init_seed: int = 0, summary_dim: int = 24) -> dict:
    return {
        "type": "dual_head",
        "version": 1,
        "scripts": list(scripts),
        "init_seed": init_seed,
        "summary_dim": summary_dim,
        "input_height": INPUT_HEIGHT,
        "encoder": [dict(m) for m in DESK_IDENT_ENCODER],
    }


class DualHeadGraph:
    def __init__(self, spec: dict, dtype=np.float32):
        self.spec = spec
        self.scripts = tuple(spec["scripts"])
        rng = np.random.default_rng(spec.get("init_seed", 0))
        self.encoder = Encoder(rng, spec["encoder"], in_h=spec.get("input_height", INPUT_HEIGHT),
                               dtype=dtype)
        dim = spec.get("summary_dim", 24)
        self.script_head = GateSummarizer(rng, self.encoder.out_channels, dim,
                                          len(self.scripts), dtype)
        self.style_head = GateSummarizer(rng, self.encoder.out_channels, dim,
                                         len(STYLE_CLASSES), dtype)

    @property
    def total_stride(self) -> int:
        return self.encoder.stride_w

    def forward_t(self, x, mask: np.ndarray | None = None):
        seq = self.encoder.forward(x)
        return self.script_head.forward(seq, mask), self.style_head.forward(seq, mask)

    def named_params(self) -> dict[str, Parameter]:
        out = self.encoder.named_params("encoder")
        out.update(self.script_head.named_params("script"))
        out.update(self.style_head.named_params("style"))
        return out


register_builder("dual_head", DualHeadGraph)


def classify(img: GrayImage, graph: DualHeadGraph) -> tuple[np.ndarray, np.ndarray]:
    """Return (script distribution, style distribution) for one line image."""
    x = preprocess(img, graph.total_stride)
    script_logits, style_logits = graph.forward_t(as_tensor(x[None]))
    script = ops.softmax(script_logits).data[0].astype(np.float64)
    style = ops.softmax(style_logits).data[0].astype(np.float64)
    return script, style


@dataclass(frozen=True)
class RouterConfig:
    hw_threshold: float = 0.95

    def __post_init__(self):
        if not (0.0 <= self.hw_threshold <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")


def route(style_dist: np.ndarray, cfg: RouterConfig = RouterConfig()) -> str:
    """Handwriting engine iff P(handwritten) >= threshold (inclusive)."""
    p_hw = float(style_dist[STYLE_CLASSES.index("handwritten")])
    if not math.isfinite(p_hw):
        raise ValueError("invalid style distribution")
    return ENGINE_HTR if p_hw >= cfg.hw_threshold else ENGINE_OCR


def _cross_entropy(logits, target: int):
    logp = ops.log_softmax(logits)
    pick = ops.narrow(ops.reshape(logp, (logp.data.shape[-1],)), 0, target, 1)
    return ops.mul(ops.reduce_sum(pick), -1.0)


@dataclass(frozen=True)
class IdentTrainConfig:
    lr0: float = 0.1
    decay_rate: float = 0.5
    decay_steps: int = 2000
    batch_size: int = 8
    max_steps: int = 300
    seed: int = 0
    clip_norm: float | None = 5.0


def train_identifier(records, spec: dict, cfg: IdentTrainConfig) -> tuple[DualHeadGraph, list[dict]]:
    """Train both heads jointly with equally weighted cross-entropy.

    ``records`` holds (GrayImage, script_name, style_name) triples.
    """
    records = list(records)
    if not records:
        raise ValueError("empty identifier training set")
    graph = DualHeadGraph(spec)
    stride = graph.total_stride
    prepared = []
    for img, script_name, style_name in records:
        x = preprocess(img, stride)
        prepared.append((x, graph.scripts.index(script_name), STYLE_CLASSES.index(style_name)))

    params = graph.named_params()
    rng = np.random.default_rng(cfg.seed)
    metrics: list[dict] = []
    order: list[int] = []
    for step in range(cfg.max_steps):
        if len(order) < cfg.batch_size:
            order.extend(rng.permutation(len(prepared)).tolist())
        batch = [prepared[order.pop()] for _ in range(cfg.batch_size)]
        widths = [b[0].shape[1] for b in batch]
        wmax = max(widths)
        x = np.ones((len(batch), INPUT_HEIGHT, wmax, 1), dtype=np.float32)
        mask = np.zeros((len(batch), graph.encoder.out_width(wmax), 1), dtype=np.float32)
        for i, (xi, _, _) in enumerate(batch):
            x[i, :, : xi.shape[1], :] = xi
            mask[i, : graph.encoder.out_width(xi.shape[1]), :] = 1.0
        script_logits, style_logits = graph.forward_t(as_tensor(x), mask)
        losses = []
        for i, (_, script_t, style_t) in enumerate(batch):
            losses.append(_cross_entropy(ops.narrow(script_logits, 0, i, 1), script_t))
            losses.append(_cross_entropy(ops.narrow(style_logits, 0, i, 1), style_t))
        loss = ops.mul(ops.reduce_sum(ops.concat([ops.reshape(l, (1,)) for l in losses], axis=0)),
                       1.0 / len(batch))
        loss.backward()
        grads = clip_gradients({k: p.grad for k, p in params.items() if p.grad is not None},
                               cfg.clip_norm)
        lr = cfg.lr0 * cfg.decay_rate ** (step / cfg.decay_steps)
        for name, p in params.items():
            g = grads.get(name)
            if g is not None:
                p.data -= (lr * g).astype(p.data.dtype)
            p.grad = None
        metrics.append({"step": step + 1, "loss": float(loss.data), "lr": lr})
    return graph, metrics
