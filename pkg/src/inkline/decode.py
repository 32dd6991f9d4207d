"""Character n-gram language model and prefix beam search with
log-linear language-model fusion.

The language model is counts-only with stupid backoff: an unseen n-gram
backs off to the next shorter context with a fixed penalty factor,
bottoming out at a uniform floor over the alphabet, so every score is
finite. Beam search is done over collapsed prefixes; each newly emitted
character adds the weighted language-model score and a constant
insertion bonus to the fused hypothesis score.
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn.ctc import greedy_labels, viterbi_align

LOG_ZERO = -1e30

LM_FORMAT = "inkline-charlm"
LM_VERSION = 1


class CharNGramLM:
    """Character n-gram counts with stupid backoff scoring."""

    def __init__(self, order: int, backoff: float = 0.4):
        if order < 1:
            raise ValueError("order must be at least 1")
        self.order = order
        self.backoff = backoff
        # counts[k] maps a k-length context string to {next_char: count}
        self.counts: list[dict[str, dict[str, int]]] = [dict() for _ in range(order)]
        self.vocab: set[str] = set()

    def add_text(self, text: str) -> None:
        self.vocab.update(text)
        for i, ch in enumerate(text):
            for k in range(min(i, self.order - 1) + 1):
                ctx = text[i - k : i]
                table = self.counts[k].setdefault(ctx, {})
                table[ch] = table.get(ch, 0) + 1

    def log_prob(self, ch: str, context: str) -> float:
        """Stupid-backoff score; always finite for any context."""
        if not self.vocab:
            raise ValueError("language model has no counts")
        ctx = context[-(self.order - 1) :] if self.order > 1 else ""
        penalty = 0.0
        for k in range(len(ctx), -1, -1):
            table = self.counts[k].get(ctx[len(ctx) - k :])
            if table:
                total = sum(table.values())
                hit = table.get(ch, 0)
                if hit:
                    return penalty + math.log(hit / total)
            penalty += math.log(self.backoff)
        # uniform floor over the alphabet plus one unknown slot; one backoff
        # factor was charged per missed level, including the unigram level
        return penalty + math.log(1.0 / (len(self.vocab) + 1))

    def sequence_log_prob(self, text: str) -> float:
        return sum(self.log_prob(ch, text[:i]) for i, ch in enumerate(text))

    def to_dict(self) -> dict:
        return {
            "format": LM_FORMAT,
            "version": LM_VERSION,
            "order": self.order,
            "backoff": self.backoff,
            "vocab": sorted(self.vocab),
            "counts": [
                {ctx: dict(sorted(table.items())) for ctx, table in sorted(level.items())}
                for level in self.counts
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "CharNGramLM":
        if d.get("format") != LM_FORMAT:
            raise ValueError("not a language model file")
        if d.get("version") != LM_VERSION:
            raise ValueError(f"unsupported language model version {d.get('version')}")
        lm = CharNGramLM(d["order"], d["backoff"])
        lm.vocab = set(d["vocab"])
        lm.counts = [dict(level) for level in d["counts"]]
        return lm

    def save(self, path: str | Path) -> None:
        payload = json.dumps(self.to_dict(), ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as fh:
            # fixed mtime and empty name keep the bytes path-independent
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(payload)

    @staticmethod
    def load(path: str | Path) -> "CharNGramLM":
        with gzip.open(path, "rb") as gz:
            return CharNGramLM.from_dict(json.loads(gz.read().decode("utf-8")))

    def dump_text(self) -> str:
        """Diffable plain-text dump of the count tables."""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=1, sort_keys=False)


def train_lm(lines, order: int = 5, backoff: float = 0.4) -> CharNGramLM:
    """Count all k-grams (k <= order) over an iterable of text lines."""
    lm = CharNGramLM(order, backoff)
    n = 0
    for line in lines:
        line = line.rstrip("\n")
        if line:
            lm.add_text(line)
            n += 1
    if n == 0:
        raise ValueError("empty language model corpus")
    return lm


@dataclass(frozen=True)
class DecoderWeights:
    lm_weight: float = 0.0
    char_bonus: float = 0.0

    def __post_init__(self):
        if self.lm_weight < 0 or not math.isfinite(self.lm_weight) or not math.isfinite(self.char_bonus):
            raise ValueError("decoder weights must be finite and lm_weight non-negative")


@dataclass(frozen=True)
class DecodeResult:
    text: str
    confidences: tuple[float, ...]
    score: float

    @property
    def confidence(self) -> float:
        """Line confidence: mean over per-character confidences (1.0 when empty)."""
        if not self.confidences:
            return 1.0
        return float(sum(self.confidences) / len(self.confidences))


def _char_confidences(log_probs: np.ndarray, labels: list[int]) -> tuple[float, ...]:
    """Max frame posterior within each character's best-path emitting frames."""
    if not labels:
        return ()
    frames_per_char = viterbi_align(log_probs, labels)
    out = []
    for ch, frames in zip(labels, frames_per_char):
        out.append(float(np.exp(max(log_probs[t, ch] for t in frames))))
    return tuple(out)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class _Hyp:
    __slots__ = ("p_blank", "p_char", "lm_total")

    def __init__(self, p_blank=LOG_ZERO, p_char=LOG_ZERO, lm_total=0.0):
        self.p_blank = p_blank   # log prob of paths ending in blank
        self.p_char = p_char     # log prob of paths ending in the last char
        self.lm_total = lm_total  # weighted LM + bonus total for the prefix

    def log_ctc(self) -> float:
        return np.logaddexp(self.p_blank, self.p_char)

    def fused(self) -> float:
        return self.log_ctc() + self.lm_total


def beam_search(log_probs: np.ndarray, alphabet, weights: DecoderWeights = DecoderWeights(),
                beam: int = 16, lm: CharNGramLM | None = None) -> DecodeResult:
    """Prefix beam search over log-softmax-normalized frame scores.

    Hypotheses are collapsed label prefixes scored by the exact sum of
    their surviving alignment paths plus ``lm_weight * log P(char |
    prefix) + char_bonus`` per emitted character. ``beam == 1``
    short-circuits to best-path (greedy) decoding, which it equals by
    contract. ``beam = None`` disables pruning entirely.
    """
    if beam is not None and beam < 1:
        raise ValueError("beam must be at least 1")
    log_probs = np.asarray(log_probs, dtype=np.float64)
    n_chars = len(alphabet.chars)
    blank = alphabet.blank
    if log_probs.shape[1] != n_chars + 1:
        raise ValueError("logit width does not match the alphabet")

    if beam == 1:
        labels = greedy_labels(log_probs, blank)
        text = alphabet.decode(labels)
        lm_total = 0.0
        if lm is not None and weights.lm_weight > 0:
            lm_total = weights.lm_weight * lm.sequence_log_prob(text)
        lm_total += weights.char_bonus * len(labels)
        score = _prefix_log_prob(log_probs, labels, blank) + lm_total
        return DecodeResult(text, _char_confidences(log_probs, labels), float(score))

    def lm_score(prefix: tuple[int, ...], c: int) -> float:
        total = weights.char_bonus
        if lm is not None and weights.lm_weight > 0:
            context = alphabet.decode(prefix)
            total += weights.lm_weight * lm.log_prob(alphabet.chars[c], context)
        return total

    beams: dict[tuple[int, ...], _Hyp] = {(): _Hyp(p_blank=0.0, p_char=LOG_ZERO, lm_total=0.0)}
    for t in range(log_probs.shape[0]):
        frame = log_probs[t]
        nxt: dict[tuple[int, ...], _Hyp] = {}

        def get(prefix: tuple[int, ...], lm_total: float) -> _Hyp:
            h = nxt.get(prefix)
            if h is None:
                h = _Hyp(lm_total=lm_total)
                nxt[prefix] = h
            return h

        for prefix, hyp in beams.items():
            total = hyp.log_ctc()
            # stay: emit blank
            stay = get(prefix, hyp.lm_total)
            stay.p_blank = np.logaddexp(stay.p_blank, total + frame[blank])
            # stay: re-emit the last char (extends its run, same prefix)
            if prefix:
                last = prefix[-1]
                stay.p_char = np.logaddexp(stay.p_char, hyp.p_char + frame[last])
            # extend with each character
            for c in range(n_chars):
                if prefix and c == prefix[-1]:
                    base = hyp.p_blank  # repeat char requires a blank in between
                else:
                    base = total
                if base <= LOG_ZERO:
                    continue
                new_prefix = prefix + (c,)
                ext = nxt.get(new_prefix)
                if ext is None:
                    ext = _Hyp(lm_total=hyp.lm_total + lm_score(prefix, c))
                    nxt[new_prefix] = ext
                ext.p_char = np.logaddexp(ext.p_char, base + frame[c])
        if beam is not None and len(nxt) > beam:
            top = sorted(nxt.items(), key=lambda kv: -kv[1].fused())[:beam]
            nxt = dict(top)
        beams = nxt

    # The reported score is a property of the text, not of pruning: rescore
    # the survivors with the exact full-marginal prefix probability. This
    # keeps scores comparable (and monotone) across beam widths.
    best_prefix, best_score = None, -np.inf
    for prefix, hyp in beams.items():
        exact = _prefix_log_prob(log_probs, list(prefix), blank) + hyp.lm_total
        if exact > best_score:
            best_prefix, best_score = prefix, exact
    labels = list(best_prefix)
    text = alphabet.decode(labels)
    return DecodeResult(text, _char_confidences(log_probs, labels), float(best_score))


def _prefix_log_prob(log_probs: np.ndarray, labels: list[int], blank: int) -> float:
    """Exact log P_ctc(labels | frames): forward algorithm over the full
    frame sequence."""
    frames = log_probs.shape[0]
    ext = [blank]
    for c in labels:
        ext.extend((c, blank))
    s_len = len(ext)
    alpha = np.full(s_len, -np.inf)
    alpha[0] = log_probs[0, ext[0]]
    if s_len > 1:
        alpha[1] = log_probs[0, ext[1]]
    for t in range(1, frames):
        prev = alpha
        alpha = np.full(s_len, -np.inf)
        for s in range(s_len):
            v = prev[s]
            if s >= 1:
                v = np.logaddexp(v, prev[s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                v = np.logaddexp(v, prev[s - 2])
            alpha[s] = v + log_probs[t, ext[s]]
    out = alpha[s_len - 1]
    if s_len > 1:
        out = np.logaddexp(out, alpha[s_len - 2])
    return float(out)


def tune_weights(dev_set, grid_lm: list[float], grid_bonus: list[float],
                 alphabet, lm: CharNGramLM | None, beam: int = 16) -> DecoderWeights:
    """Grid search minimizing dev CER; ties prefer smaller lm_weight,
    then smaller |char_bonus|.

    ``dev_set`` holds (log_probs, reference_text) pairs.
    """
    from .metrics import cer

    dev_set = list(dev_set)
    if not dev_set:
        raise ValueError("empty dev set")
    best = None
    for lw in grid_lm:
        for cb in grid_bonus:
            w = DecoderWeights(lw, cb)
            hyps = [beam_search(lp, alphabet, w, beam, lm).text for lp, _ in dev_set]
            score = cer(hyps, [ref for _, ref in dev_set])
            key = (score, lw, abs(cb))
            if best is None or key < best[0]:
                best = (key, w)
    return best[1]
