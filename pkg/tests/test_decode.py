import itertools
import math

import numpy as np
import pytest

from inkline.alphabet import Alphabet
from inkline.decode import (CharNGramLM, DecodeResult, DecoderWeights, beam_search,
                            log_softmax, train_lm, tune_weights, _prefix_log_prob)


class TestCharNGramLM:
    def test_single_symbol_corpus(self):
        lm = train_lm(["aaaa"], order=2)
        assert lm.log_prob("a", "a") == pytest.approx(0.0)

    def test_unseen_context_backs_off_to_floor(self):
        lm = train_lm(["ab"], order=3)
        # 'z' unseen anywhere: two context misses plus the unigram miss,
        # then the uniform floor over |vocab|+1
        expected = 3 * math.log(0.4) + math.log(1.0 / 3.0)
        assert lm.log_prob("z", "ab") == pytest.approx(expected)

    def test_hand_traced_backoff(self):
        corpus = ["the cat", "the dog", "a cat", "the cow", "dog cat", "a dog",
                  "cow cat", "the cat", "a cow", "dog dog"]
        lm = train_lm(corpus, order=3)
        # hand counts: "ca" occurs 5 times, always followed by "t"
        assert lm.log_prob("t", "ca") == pytest.approx(0.0)
        # context "xc" unseen -> one backoff to P(a | "c"); after "c" come
        # 'a' x5 (cat) and 'o' x3 (cow)
        assert lm.log_prob("a", "xc") == pytest.approx(math.log(0.4) + math.log(5 / 8))

    def test_scores_finite_for_any_context(self):
        lm = train_lm(["hello world"], order=4)
        for ch in "hxq ":
            for ctx in ("", "zzzz", "hello ", "??"):
                assert math.isfinite(lm.log_prob(ch, ctx))

    def test_sequence_chain_rule(self):
        lm = train_lm(["abab", "abba"], order=3)
        text = "abb"
        total = sum(lm.log_prob(c, text[:i]) for i, c in enumerate(text))
        assert lm.sequence_log_prob(text) == pytest.approx(total)

    def test_round_trip_and_dump(self, tmp_path):
        lm = train_lm(["counts survive"], order=3)
        path = tmp_path / "model.lm"
        lm.save(path)
        back = CharNGramLM.load(path)
        assert back.order == lm.order
        assert back.counts == lm.counts
        assert back.vocab == lm.vocab
        assert "inkline-charlm" in lm.dump_text()

    def test_save_is_deterministic(self, tmp_path):
        lm = train_lm(["deterministic bytes"], order=2)
        a, b = tmp_path / "a.lm", tmp_path / "b.lm"
        lm.save(a)
        lm.save(b)
        assert a.read_bytes() == b.read_bytes()

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            train_lm([], order=2)


def exhaustive_best(log_probs, alphabet, w, lm):
    frames = log_probs.shape[0]
    n = len(alphabet.chars)
    best = None
    for length in range(frames + 1):
        for labels in itertools.product(range(n), repeat=length):
            labels = list(labels)
            p = _prefix_log_prob(log_probs, labels, alphabet.blank)
            if not np.isfinite(p):
                continue
            fused = p + w.char_bonus * length
            if lm is not None and w.lm_weight > 0:
                fused += w.lm_weight * lm.sequence_log_prob(alphabet.decode(labels))
            if best is None or fused > best[0] + 1e-15:
                best = (fused, alphabet.decode(labels))
    return best


class TestBeamSearch:
    def test_beam_one_equals_greedy_collapse(self):
        rng = np.random.default_rng(0)
        alphabet = Alphabet("abc")
        from inkline.nn.ctc import greedy_labels

        for _ in range(20):
            lp = log_softmax(rng.normal(size=(7, 4)) * 2)
            got = beam_search(lp, alphabet, DecoderWeights(0.0, 0.0), beam=1)
            assert got.text == alphabet.decode(greedy_labels(lp, 3))

    def test_unbounded_beam_matches_exhaustive(self):
        rng = np.random.default_rng(42)
        lm = train_lm(["abab", "aabb", "ba"], order=3)
        worst = 0.0
        for trial in range(30):
            n = int(rng.integers(1, 4))
            frames = int(rng.integers(2, 7))
            alphabet = Alphabet("abc"[:n])
            lp = log_softmax(rng.normal(size=(frames, n + 1)) * 1.5)
            if trial % 2:
                w = DecoderWeights(float(rng.uniform(0.1, 1.0)), float(rng.uniform(-1, 1)))
                use_lm = lm
            else:
                w = DecoderWeights(0.0, 0.0)
                use_lm = None
            got = beam_search(lp, alphabet, w, beam=None, lm=use_lm)
            ref = exhaustive_best(lp, alphabet, w, use_lm)
            assert got.text == ref[1]
            worst = max(worst, abs(got.score - ref[0]))
        assert worst <= 1e-9

    def test_lm_dominates_noisy_logits(self):
        alphabet = Alphabet("act")
        lm = train_lm(["cat"] * 5, order=3)
        rng = np.random.default_rng(3)
        # logits mildly favor a junk string; a strong LM must override it
        lp = log_softmax(rng.normal(size=(6, 4)))
        out = beam_search(lp, alphabet, DecoderWeights(8.0, 0.0), beam=None, lm=lm)
        assert out.text in ("", "c", "ca", "cat")

    def test_beam_width_monotone_score(self):
        rng = np.random.default_rng(11)
        alphabet = Alphabet("ab")
        for _ in range(15):
            lp = log_softmax(rng.normal(size=(8, 3)) * 2)
            scores = [beam_search(lp, alphabet, beam=b).score for b in (1, 2, 4, 8, None)]
            assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))

    def test_confidences_are_max_frame_posteriors(self):
        alphabet = Alphabet("ab")
        # hand-built: frame posteriors nearly one-hot spelling "ab"
        logits = np.array([[5.0, -5, -5], [-5, 5.0, -5]])
        lp = log_softmax(logits)
        out = beam_search(lp, alphabet, beam=4)
        assert out.text == "ab"
        expected = float(np.exp(lp[0, 0]))
        assert out.confidences[0] == pytest.approx(expected, abs=1e-9)
        assert out.confidence == pytest.approx(float(np.mean(out.confidences)), abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        alphabet = Alphabet("abc")
        lp = log_softmax(rng.normal(size=(9, 4)))
        a = beam_search(lp, alphabet, beam=6)
        b = beam_search(lp, alphabet, beam=6)
        assert a == b

    def test_beam_zero_rejected(self):
        with pytest.raises(ValueError):
            beam_search(np.zeros((2, 2)), Alphabet("a"), beam=0)


class TestTuneWeights:
    @staticmethod
    def _dev_from_texts(texts, alphabet, sharp=6.0):
        dev = []
        for text in texts:
            ids = alphabet.encode(text)
            frames = 2 * len(ids) + 1
            logits = np.full((frames, len(alphabet.chars) + 1), -sharp)
            for i, c in enumerate(ids):
                logits[2 * i + 1, c] = sharp
            for t in range(0, frames, 2):
                logits[t, alphabet.blank] = sharp
            dev.append((log_softmax(logits), text))
        return dev

    def test_uninformative_lm_chooses_zero_weight(self):
        alphabet = Alphabet("ab")
        dev = self._dev_from_texts(["ab", "ba", "aa"], alphabet)
        lm = train_lm(["zzz"], order=2)
        w = tune_weights(dev, [0.0, 0.5, 1.0], [0.0], alphabet, lm, beam=8)
        assert w.lm_weight == 0.0

    def test_single_grid_point_returned(self):
        alphabet = Alphabet("ab")
        dev = self._dev_from_texts(["ab"], alphabet)
        w = tune_weights(dev, [0.25], [-0.5], alphabet, None, beam=4)
        assert w == DecoderWeights(0.25, -0.5)

    def test_planted_optimum_recovered(self):
        alphabet = Alphabet("abc")
        lm = train_lm(["abc abc abc"], order=3)
        rng = np.random.default_rng(7)
        dev = []
        for _ in range(6):
            ids = alphabet.encode("abc")
            frames = 9
            logits = rng.normal(size=(frames, 4)) * 0.35  # noisy
            for i, c in enumerate(ids):
                logits[3 * i + 1, c] += 1.1  # weak correct signal
            dev.append((log_softmax(logits), "abc"))
        w = tune_weights(dev, [0.0, 1.0], [0.0], alphabet, lm, beam=None)
        assert w.lm_weight == 1.0

    def test_empty_dev_set_rejected(self):
        with pytest.raises(ValueError):
            tune_weights([], [0.0], [0.0], Alphabet("a"), None)
