"""Single-process SGD training for the line recognizer.

Training is deterministic given the config seed: data order, parameter
init, and every update are driven by seeded generators on one thread.
The best-scoring parameters (dev CER when a dev set is given, else
train CER) are kept and restored at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..alphabet import Alphabet
from ..image import GrayImage
from ..metrics import cer
from .autodiff import Parameter, as_tensor
from . import ops
from .ctc import ctc_loss, greedy_labels, min_frames
from .model import Recognizer, preprocess


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.1
    decay_rate: float = 0.5
    decay_steps: int = 2000
    batch_size: int = 8
    max_steps: int = 400
    seed: int = 0
    eval_every: int = 50
    target_train_cer: float | None = None
    clip_norm: float | None = 5.0
    momentum: float = 0.0


def learning_rate(cfg: TrainConfig, t: int) -> float:
    return cfg.lr0 * cfg.decay_rate ** (t / cfg.decay_steps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float | None) -> dict[str, np.ndarray]:
    """Global-norm clipping; plain SGD diverges on this loss without it."""
    if max_norm is None:
        return grads
    total = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values())))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def sgd_step(params: dict[str, Parameter], grads: dict[str, np.ndarray],
             cfg: TrainConfig, t: int,
             velocity: dict[str, np.ndarray] | None = None) -> None:
    """One SGD update at the scheduled rate, with classical momentum when a
    velocity store is passed. Zero gradients (and zero velocity) leave the
    parameters unchanged."""
    lr = learning_rate(cfg, t)
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if velocity is not None and cfg.momentum > 0:
            v = velocity.get(name)
            v = cfg.momentum * v + g if v is not None else g.copy()
            velocity[name] = v
            g = v
        p.data -= (lr * g).astype(p.data.dtype)


@dataclass
class TrainResult:
    model: Recognizer
    alphabet: Alphabet
    metrics: list[dict] = field(default_factory=list)
    best_cer: float = float("inf")
    best_step: int = -1


def _prepare(records, model: Recognizer, alphabet: Alphabet):
    stride = model.total_stride
    out = []
    for img, text in records:
        x = preprocess(img if isinstance(img, GrayImage) else GrayImage(img), stride)
        label = alphabet.encode(text)
        frames = model.out_frames(x.shape[1])
        if frames < min_frames(label):
            raise ValueError(
                f"label unalignable: {text!r} needs {min_frames(label)} frames, image gives {frames}"
            )
        out.append((x, label, frames, text))
    return out


def _batch_x(items) -> np.ndarray:
    widths = [it[0].shape[1] for it in items]
    w = max(widths)
    batch = np.ones((len(items), items[0][0].shape[0], w, 1), dtype=items[0][0].dtype)
    for i, (x, _, _, _) in enumerate(items):
        batch[i, :, : x.shape[1], :] = x
    return batch


def _corpus_cer(model: Recognizer, prepared) -> float:
    hyps, refs = [], []
    for x, _, frames, text in prepared:
        logits = model.forward(x[None])[0, :frames]
        hyps.append(model.alphabet.decode(greedy_labels(logits)))
        refs.append(text)
    return cer(hyps, refs)


def train_recognizer(records, spec: dict, cfg: TrainConfig, dev_records=None) -> TrainResult:
    """Minibatch SGD with sequence (CTC) loss over (image, text) records.

    ``records`` holds (GrayImage, transcription) pairs. When the spec has
    an empty alphabet it is derived from the training transcriptions.
    """
    records = list(records)
    if not records:
        raise ValueError("empty training set")
    if not spec.get("alphabet"):
        spec = dict(spec, alphabet=list(Alphabet.from_texts(t for _, t in records).chars))
    model = Recognizer(spec)
    alphabet = model.alphabet
    prepared = _prepare(records, model, alphabet)
    dev_prepared = _prepare(dev_records, model, alphabet) if dev_records else None

    rng = np.random.default_rng(cfg.seed)
    params = model.named_params()
    velocity: dict[str, np.ndarray] = {}
    result = TrainResult(model=model, alphabet=alphabet)
    best_params: dict[str, np.ndarray] | None = None

    def epoch_batches() -> list[list[int]]:
        # width-bucketed batches: shuffle, locally sort by frame count to
        # limit padding waste, then shuffle the batch order
        perm = rng.permutation(len(prepared)).tolist()
        batches = []
        window = 4 * cfg.batch_size
        for lo in range(0, len(perm), window):
            group = sorted(perm[lo : lo + window], key=lambda i: prepared[i][2])
            for b in range(0, len(group), cfg.batch_size):
                batches.append(group[b : b + cfg.batch_size])
        order = rng.permutation(len(batches))
        return [batches[i] for i in order]

    queue: list[list[int]] = []
    step = 0
    while step < cfg.max_steps:
        if not queue:
            queue = epoch_batches()
        batch = [prepared[i] for i in queue.pop()]
        x = as_tensor(_batch_x(batch))
        logits = model.forward_t(x)
        losses = []
        for i, (_, label, frames, _) in enumerate(batch):
            sample = ops.reshape(ops.narrow(ops.narrow(logits, 0, i, 1), 1, 0, frames),
                                 (frames, logits.data.shape[2]))
            losses.append(ctc_loss(sample, label))
        loss = ops.mul(ops.reduce_sum(ops.concat([ops.reshape(l, (1,)) for l in losses], axis=0)),
                       1.0 / len(losses))
        loss.backward()
        grads = {name: p.grad for name, p in params.items() if p.grad is not None}
        grads = clip_gradients(grads, cfg.clip_norm)
        sgd_step(params, grads, cfg, step, velocity)
        for p in params.values():
            p.grad = None
        step += 1

        entry = {"step": step, "loss": float(loss.data), "lr": learning_rate(cfg, step)}
        if step % cfg.eval_every == 0 or step == cfg.max_steps:
            eval_cer = _corpus_cer(model, dev_prepared if dev_prepared else prepared)
            entry["cer"] = eval_cer
            if eval_cer < result.best_cer:
                result.best_cer = eval_cer
                result.best_step = step
                best_params = {k: p.data.copy() for k, p in params.items()}
            if cfg.target_train_cer is not None and eval_cer <= cfg.target_train_cer:
                result.metrics.append(entry)
                break
        result.metrics.append(entry)

    if best_params is not None:
        for k, p in params.items():
            p.data = best_params[k]
    return result
