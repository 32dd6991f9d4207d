"""Shared fixtures: deterministic toy datasets and trained toy models.

Training fixtures are session-scoped because several test modules (and
the acceptance suite) reuse the same trained stack; everything is seeded
so reruns are bit-identical.
"""

import json

import numpy as np
import pytest

from inkgen import WORDS, ink_for_text, word_inks
from inkline.degrade import DegradeContext, default_graph, degrade
from inkline.decode import train_lm
from inkline.ident import IdentTrainConfig, identifier_spec, train_identifier
from inkline.image import GrayImage
from inkline.nn.checkpoint import save_model
from inkline.nn.model import recognizer_spec
from inkline.nn.train import TrainConfig, train_recognizer
from inkline.render import RenderConfig, render_ink, sample_render_params
from inkline.seeds import rng_for
from inkline.typeset import render_text_line

TOY_RENDER = RenderConfig(stroke_width_range=(2, 4), slant_range=(-0.15, 0.15),
                          border_range=(3, 8), target_h=100)


def render_word_records(words, seed=5, ink_seed=11, cfg=TOY_RENDER):
    records = []
    for sid, sample in word_inks(list(words), seed=ink_seed):
        img = render_ink(sample.ink, sample_render_params(rng_for(seed, sid), cfg))
        records.append((img, sample.transcription))
    return records


@pytest.fixture(scope="session")
def word_records():
    """The 50 rendered handwriting words used by the overfit runs."""
    return render_word_records(WORDS[:50])


@pytest.fixture(scope="session")
def grcl_result(word_records):
    spec = recognizer_spec([], arch="grcl", init_seed=1)
    cfg = TrainConfig(lr0=0.25, decay_rate=0.5, decay_steps=1500, batch_size=8,
                      max_steps=2400, seed=1, eval_every=100, target_train_cer=0.02)
    return train_recognizer(word_records, spec, cfg)


@pytest.fixture(scope="session")
def blstm_result(word_records):
    spec = recognizer_spec([], arch="blstm", init_seed=1)
    cfg = TrainConfig(lr0=0.12, decay_rate=0.5, decay_steps=1500, batch_size=8,
                      max_steps=2400, seed=1, eval_every=100, target_train_cer=0.02)
    return train_recognizer(word_records, spec, cfg)


@pytest.fixture(scope="session")
def char_lm():
    return train_lm((w for w in WORDS), order=5)


@pytest.fixture(scope="session")
def typeset_records():
    """Typeset renders of the toy vocabulary (printed-class data)."""
    return [(render_text_line(w, scale=5, border=6), w) for w in WORDS]


@pytest.fixture(scope="session")
def ocr_result(typeset_records):
    records = [(img, text) for img, text in typeset_records]
    spec = recognizer_spec([], arch="grcl", init_seed=2)
    cfg = TrainConfig(lr0=0.25, decay_rate=0.5, decay_steps=1500, batch_size=8,
                      max_steps=2400, seed=2, eval_every=100, target_train_cer=0.02)
    return train_recognizer(records, spec, cfg)


def identifier_dataset():
    """200 handwritten + 200 typeset training lines plus 50 + 50 held out.

    Handwritten lines alternate between the plain and mirrored glyph sets,
    labeled as two scripts, so the script head is genuinely multi-class.
    """
    words = [WORDS[i % len(WORDS)] for i in range(250)]
    hw = []
    rng = np.random.default_rng(77)
    for i, w in enumerate(words):
        mirror = i % 2 == 1
        sample = ink_for_text(w, rng, mirror=mirror)
        img = render_ink(sample.ink, sample_render_params(rng_for(9, f"hw{i}"), TOY_RENDER))
        hw.append((img, "Grek" if mirror else "Latn", "handwritten"))
    ts = []
    for i, w in enumerate(words):
        scale = 4 + (i % 3)
        ts.append((render_text_line(w, scale=scale, border=5), "Latn", "printed"))
    train = hw[:200] + ts[:200]
    held = hw[200:250] + ts[200:250]
    return train, held


@pytest.fixture(scope="session")
def ident_result():
    train, held = identifier_dataset()
    spec = identifier_spec(["Latn", "Grek"], init_seed=4)
    cfg = IdentTrainConfig(lr0=0.1, max_steps=400, batch_size=8, seed=4)
    graph, metrics = train_identifier(train, spec, cfg)
    return graph, held, metrics


@pytest.fixture(scope="session")
def stack_dir(tmp_path_factory, grcl_result, ocr_result, ident_result, char_lm):
    """On-disk trained stack: checkpoints, LM, and a pipeline config."""
    root = tmp_path_factory.mktemp("stack")
    save_model(grcl_result.model, root / "htr.npz")
    save_model(ocr_result.model, root / "ocr.npz")
    save_model(ident_result[0], root / "ident.npz")
    char_lm.save(root / "char.lm")
    config = {
        "seed": 0,
        "models": {"identifier": "ident.npz", "htr": "htr.npz", "ocr": "ocr.npz"},
        "lm": "char.lm",
        "decoder": {"lm_weight": 0.3, "char_bonus": 0.0, "beam": 12},
        "router_theta": 0.95,
    }
    (root / "pipeline.json").write_text(json.dumps(config), encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def degraded_ablation_data():
    """500-word toy set rendered clean and degraded, plus a degraded
    held-out test set, for the degradation-ablation comparison."""
    vocab = WORDS[:20]
    words = [vocab[i % len(vocab)] for i in range(550)]
    inks = word_inks(words, seed=21)
    graph = default_graph()
    clean, degraded = [], []
    for i, (sid, sample) in enumerate(inks):
        img = render_ink(sample.ink, sample_render_params(rng_for(31, sid), TOY_RENDER))
        clean.append((img, sample.transcription))
        dimg = degrade(img, graph, rng_for(32, sid), DegradeContext())
        degraded.append((dimg, sample.transcription))
    return {
        "train_clean": clean[:450],
        "train_degraded": degraded[:450],
        "test_degraded": degraded[450:],
    }
