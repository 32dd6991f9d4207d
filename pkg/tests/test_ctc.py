"""Sequence-loss checks against an exhaustive path-enumeration oracle."""

import numpy as np
import pytest

from inkline.nn.ctc import (ctc_forward_backward, greedy_labels, min_frames,
                            viterbi_align)


def log_softmax_np(logits):
    s = logits - logits.max(-1, keepdims=True)
    return s - np.log(np.exp(s).sum(-1, keepdims=True))


def brute_force_nll(logits: np.ndarray, label: list[int], blank: int) -> float:
    """Sum the probability of every frame path that collapses to the label.

    Vectorized over all |V|^F paths: paths are encoded as mixed-radix
    integers; collapse keys are built per frame. Independent of the
    forward-backward implementation.
    """
    frames, vocab = logits.shape
    y = log_softmax_np(logits.astype(np.float64))
    n_paths = vocab ** frames
    idx = np.arange(n_paths)
    digits = np.empty((n_paths, frames), dtype=np.int64)
    for t in range(frames):
        digits[:, t] = (idx // vocab ** t) % vocab

    logp = np.zeros(n_paths)
    key = np.zeros(n_paths, dtype=np.int64)
    prev = np.full(n_paths, -1, dtype=np.int64)
    for t in range(frames):
        c = digits[:, t]
        logp += y[t, c]
        emit = (c != blank) & (c != prev)
        key = np.where(emit, key * (vocab + 1) + c + 1, key)
        prev = c

    target = 0
    for c in label:
        target = target * (vocab + 1) + c + 1
    mask = key == target
    if not mask.any():
        return float("inf")
    sel = logp[mask]
    m = sel.max()
    return float(-(m + np.log(np.exp(sel - m).sum())))


class TestCtcExamples:
    def test_single_frame_uniform(self):
        logits = np.zeros((1, 2))  # uniform over {char, blank}
        loss, _ = ctc_forward_backward(logits, [0], blank=1)
        assert loss == pytest.approx(-np.log(0.5), abs=1e-12)

    def test_empty_label_all_blank_path(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(5, 4))
        loss, _ = ctc_forward_backward(logits, [], blank=3)
        expected = -log_softmax_np(logits)[:, 3].sum()
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_infeasible_label_raises(self):
        logits = np.zeros((2, 3))
        with pytest.raises(ValueError, match="label unalignable"):
            ctc_forward_backward(logits, [0, 0], blank=2)  # needs 3 frames

    def test_min_frames_counts_repeats(self):
        assert min_frames([]) == 0
        assert min_frames([1, 2, 3]) == 3
        assert min_frames([1, 1]) == 3
        assert min_frames([1, 1, 2, 2, 2]) == 8


class TestCtcOracle:
    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(99)
        checked = 0
        worst = 0.0
        while checked < 120:
            n_chars = int(rng.integers(1, 5))
            frames = int(rng.integers(1, 7))
            length = int(rng.integers(0, 4))
            label = [int(c) for c in rng.integers(0, n_chars, size=length)]
            if frames < min_frames(label):
                continue
            logits = rng.normal(size=(frames, n_chars + 1)) * 2.0
            loss, _ = ctc_forward_backward(logits, label, blank=n_chars)
            ref = brute_force_nll(logits, label, blank=n_chars)
            worst = max(worst, abs(loss - ref))
            checked += 1
        assert worst <= 1e-9

    def test_batch_permutation_invariance(self):
        rng = np.random.default_rng(5)
        items = []
        for _ in range(6):
            frames = int(rng.integers(4, 9))
            label = [int(c) for c in rng.integers(0, 3, size=2)]
            items.append((rng.normal(size=(frames, 4)), label))
        losses = [ctc_forward_backward(lg, lb, 3)[0] for lg, lb in items]
        perm = rng.permutation(6)
        shuffled = [ctc_forward_backward(items[i][0], items[i][1], 3)[0] for i in perm]
        assert sorted(np.round(losses, 12)) == sorted(np.round(shuffled, 12))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(6, 4))
        label = [0, 1, 0]
        _, grad = ctc_forward_backward(logits, label)
        eps = 1e-6
        for i in range(6):
            for j in range(4):
                up = logits.copy()
                up[i, j] += eps
                down = logits.copy()
                down[i, j] -= eps
                numeric = (ctc_forward_backward(up, label)[0]
                           - ctc_forward_backward(down, label)[0]) / (2 * eps)
                assert numeric == pytest.approx(grad[i, j], abs=1e-7)


class TestGreedyAndAlignment:
    def test_greedy_collapse_rule(self):
        # one-hot frames spelling c a a _ b b -> "cab"
        chars = {"a": 0, "b": 1, "c": 2}
        blank = 3
        seq = ["c", "a", "a", None, "b", "b"]
        logits = np.full((len(seq), 4), -5.0)
        for t, s in enumerate(seq):
            logits[t, blank if s is None else chars[s]] = 5.0
        assert greedy_labels(logits, blank) == [2, 0, 1]

    def test_viterbi_alignment_frames_ordered(self):
        rng = np.random.default_rng(8)
        logits = log_softmax_np(rng.normal(size=(10, 4)) * 2)
        label = [0, 2, 1]
        frames = viterbi_align(logits, label, blank=3)
        assert len(frames) == 3
        flat = [t for fs in frames for t in fs]
        assert all(fs for fs in frames)
        assert flat == sorted(flat)

    def test_viterbi_empty_label(self):
        assert viterbi_align(np.zeros((4, 3)), [], blank=2) == []
