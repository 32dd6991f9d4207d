"""CTC loss via forward-backward in log space, with the analytic
gradient, plus greedy collapse and best-path label alignment.

Logits are (frames, alphabet+1) with the blank at the LAST index. The
loss marginalizes over every frame alignment that collapses (dedupe,
then drop blanks) to the label. Internally everything runs in float64
for numerically safe log-sums.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .ops import as_tensor

NEG_INF = -np.inf


def min_frames(label: list[int]) -> int:
    """Minimum frame count that can align to the label (repeats need a
    separating blank)."""
    repeats = sum(1 for a, b in zip(label, label[1:]) if a == b)
    return len(label) + repeats


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _extended(label: list[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(label) + 1, blank, dtype=np.int64)
    ext[1::2] = label
    return ext


def ctc_forward_backward(logits: np.ndarray, label: list[int], blank: int | None = None
                         ) -> tuple[float, np.ndarray]:
    """Return (loss, grad) where grad is d(loss)/d(logits).

    Raises if the label cannot be aligned into the available frames; an
    infinite or sentinel loss is never returned.
    """
    logits = np.asarray(logits, dtype=np.float64)
    frames, vocab = logits.shape
    if blank is None:
        blank = vocab - 1
    label = list(label)
    if frames < min_frames(label):
        raise ValueError("label unalignable: too few frames for the label")

    y = _log_softmax(logits)
    ext = _extended(label, blank)
    s_len = len(ext)

    # forward
    alpha = np.full((frames, s_len), NEG_INF)
    alpha[0, 0] = y[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = y[0, ext[1]]
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    for t in range(1, frames):
        prev = alpha[t - 1]
        stay = prev
        step = np.full(s_len, NEG_INF)
        step[1:] = prev[:-1]
        skip = np.full(s_len, NEG_INF)
        if s_len > 2:
            skip[2:] = prev[:-2]
        skip = np.where(skip_ok, skip, NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), skip) + y[t, ext]

    tail = alpha[frames - 1, s_len - 1]
    if s_len > 1:
        tail = np.logaddexp(tail, alpha[frames - 1, s_len - 2])
    log_z = tail
    if not np.isfinite(log_z):
        raise ValueError("label unalignable: no feasible path")

    # backward (suffix completion probabilities, emission at t excluded)
    beta = np.full((frames, s_len), NEG_INF)
    beta[frames - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[frames - 1, s_len - 2] = 0.0
    for t in range(frames - 2, -1, -1):
        nxt = beta[t + 1] + y[t + 1, ext]
        stay = nxt
        step = np.full(s_len, NEG_INF)
        step[:-1] = nxt[1:]
        skip = np.full(s_len, NEG_INF)
        if s_len > 2:
            skip[:-2] = nxt[2:]
            skip_next = np.zeros(s_len, dtype=bool)
            skip_next[: s_len - 2] = skip_ok[2:]
            skip = np.where(skip_next, skip, NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), skip)

    # per-frame label posteriors, folded from states onto symbols
    occupancy = alpha + beta - log_z
    gamma = np.zeros_like(logits)
    with np.errstate(over="ignore"):
        occ = np.exp(occupancy)
    for s, k in enumerate(ext):
        gamma[:, k] += occ[:, s]
    grad = np.exp(y) - gamma
    return float(-log_z), grad


def ctc_loss(logits, label: list[int], blank: int | None = None) -> Tensor:
    """Tape op: scalar CTC loss of one sequence of raw logits."""
    logits = as_tensor(logits)
    loss_val, grad = ctc_forward_backward(logits.data, label, blank)
    out = Tensor(np.asarray(loss_val, dtype=logits.data.dtype), parents=(logits,), op="ctc_loss")

    def backward(g):
        if logits.requires_grad:
            logits.accumulate((g * grad).astype(logits.data.dtype))

    out._backward = backward
    return out


def greedy_labels(logits: np.ndarray, blank: int | None = None) -> list[int]:
    """Best-path decode: per-frame argmax, dedupe, drop blanks."""
    logits = np.asarray(logits)
    if blank is None:
        blank = logits.shape[-1] - 1
    path = logits.argmax(axis=-1)
    out = []
    prev = -1
    for p in path:
        if p != prev and p != blank:
            out.append(int(p))
        prev = p
    return out


def viterbi_align(log_probs: np.ndarray, label: list[int], blank: int | None = None
                  ) -> list[list[int]]:
    """Frames emitting each label symbol on the single best alignment.

    ``log_probs`` must be log-softmax normalized. Returns one frame-index
    list per label character.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    frames, vocab = log_probs.shape
    if blank is None:
        blank = vocab - 1
    label = list(label)
    if not label:
        return []
    if frames < min_frames(label):
        raise ValueError("label unalignable: too few frames for the label")
    ext = _extended(label, blank)
    s_len = len(ext)
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    score = np.full((frames, s_len), NEG_INF)
    back = np.zeros((frames, s_len), dtype=np.int8)
    score[0, 0] = log_probs[0, ext[0]]
    score[0, 1] = log_probs[0, ext[1]]
    for t in range(1, frames):
        prev = score[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        skip = np.where(skip_ok, np.concatenate(([NEG_INF, NEG_INF], prev[:-2])), NEG_INF)
        choice = np.argmax(np.stack([stay, step, skip]), axis=0)
        best = np.maximum(np.maximum(stay, step), skip)
        score[t] = best + log_probs[t, ext]
        back[t] = choice

    s = s_len - 1 if score[-1, s_len - 1] >= score[-1, s_len - 2] else s_len - 2
    states = [s]
    for t in range(frames - 1, 0, -1):
        s = s - back[t, s]
        states.append(s)
    states.reverse()

    frames_per_char: list[list[int]] = [[] for _ in label]
    for t, s in enumerate(states):
        if ext[s] != blank:
            frames_per_char[(s - 1) // 2].append(t)
    return frames_per_char
