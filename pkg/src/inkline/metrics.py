"""Recognition metrics: character/word error rates, IoU-matched word
precision/recall, and the precision-recall curve with its area.

Error rates are corpus-level: summed edit distance over summed reference
length. Word matching is one-to-one greedy in descending IoU among pairs
overlapping at least ``iou_min``; a geometrically matched pair with
unequal text counts as both a false positive and a false negative."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit costs (two-row rolling DP)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def cer(hyps: Sequence[str], refs: Sequence[str]) -> float:
    """Summed character edit distance over summed reference characters."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch")
    total_ref = sum(len(r) for r in refs)
    if total_ref == 0:
        raise ValueError("empty reference corpus")
    return sum(edit_distance(h, r) for h, r in zip(hyps, refs)) / total_ref


def wer(hyps: Sequence[str], refs: Sequence[str]) -> float:
    """Same as ``cer`` on whitespace-tokenized words."""
    if len(hyps) != len(refs):
        raise ValueError("hypothesis/reference count mismatch")
    hyp_words = [h.split() for h in hyps]
    ref_words = [r.split() for r in refs]
    total_ref = sum(len(r) for r in ref_words)
    if total_ref == 0:
        raise ValueError("empty reference corpus")
    return sum(edit_distance(h, r) for h, r in zip(hyp_words, ref_words)) / total_ref


@dataclass(frozen=True)
class WordBox:
    text: str
    box: tuple[float, float, float, float]  # x0, y0, x1, y1
    confidence: float = 1.0

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if x1 < x0 or y1 < y0:
            raise ValueError("box must have non-negative extent")


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]  # (pred index, ref index), geometric matches
    true_positives: int                 # matched pairs with equal text
    false_positives: int
    false_negatives: int


def match_words(pred: Sequence[WordBox], ref: Sequence[WordBox],
                iou_min: float = 0.01) -> MatchResult:
    """Greedy one-to-one matching in descending IoU order.

    Pairs below ``iou_min`` never match. Text equality (after stripping
    surrounding whitespace) decides true positives; unmatched predictions
    are false positives and unmatched references false negatives, and a
    matched pair with different text counts toward both.
    """
    candidates = []
    for i, p in enumerate(pred):
        for j, r in enumerate(ref):
            v = iou(p.box, r.box)
            if v >= iou_min:
                candidates.append((v, i, j))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_pred: set[int] = set()
    used_ref: set[int] = set()
    pairs: list[tuple[int, int]] = []
    tp = 0
    for v, i, j in candidates:
        if i in used_pred or j in used_ref:
            continue
        used_pred.add(i)
        used_ref.add(j)
        pairs.append((i, j))
        if pred[i].text.strip() == ref[j].text.strip():
            tp += 1
    fp = len(pred) - tp
    fn = len(ref) - tp
    return MatchResult(tuple(pairs), tp, fp, fn)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float

    def __post_init__(self):
        for v in (self.precision, self.recall):
            if not (0.0 <= v <= 1.0):
                raise ValueError("precision/recall outside [0, 1]")


def pr_auc(pred: Sequence[WordBox], ref: Sequence[WordBox],
           iou_min: float = 0.01) -> tuple[list[PRPoint], float]:
    """Precision-recall curve over confidence thresholds, and its area.

    The threshold sweeps every distinct prediction confidence (plus 0);
    at each value, predictions below it are dropped and matching is
    recomputed. The area integrates precision over recall (trapezoids,
    recall ascending). No predictions at all gives an empty curve and 0.
    """
    if not pred:
        return [], 0.0
    for p in pred:
        if not (0.0 <= p.confidence <= 1.0):
            raise ValueError("confidences must lie in [0, 1]")
    thresholds = sorted({0.0} | {p.confidence for p in pred})
    points: list[PRPoint] = []
    for th in thresholds:
        kept = [p for p in pred if p.confidence >= th]
        if not kept:
            continue
        m = match_words(kept, ref, iou_min)
        precision = m.true_positives / len(kept)
        recall = m.true_positives / len(ref) if ref else 0.0
        points.append(PRPoint(th, precision, recall))
    curve = sorted(points, key=lambda p: (p.recall, p.precision))
    area = 0.0
    for a, b in zip(curve, curve[1:]):
        area += (b.recall - a.recall) * (a.precision + b.precision) / 2.0
    if curve:
        # close the curve down to zero recall at the highest-precision end
        area += curve[0].recall * curve[0].precision
    return points, area
