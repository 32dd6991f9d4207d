"""Command-line pipeline: dataset building, training, decoding, and
evaluation.

Every command is re-runnable: outputs are a pure function of inputs
plus the seed, with per-sample seeds derived from (seed, sample id) so
worker count and processing order never change results. Exit codes:
0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import decode as decode_mod
from . import ident as ident_mod
from .alphabet import Alphabet
from .degrade import DegradationGraph, DegradeContext, default_graph, degrade, load_graph
from .image import GrayImage, load_gray_array
from .ink import (ConcatConfig, concat_inks_ex, labeled_ink_to_record, read_ink_file,
                  record_to_labeled_ink, split_multiline, write_ink_file)
from .manifest import (ManifestRecord, WordRef, iter_manifest, read_manifest,
                       resolve_path, write_manifest)
from .metrics import WordBox, cer, match_words, pr_auc, wer
from .nn.checkpoint import load_model, save_model
from .nn.ctc import min_frames
from .nn.model import preprocess, recognizer_spec
from .nn.train import TrainConfig, train_recognizer
from .render import RenderConfig, render_ink, sample_render_params
from .seeds import rng_for
from .synth import jitter_ink
from .typeset import render_text_line_with_boxes, scale_for_height


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    degradation_graph: str | None = None
    backgrounds_dir: str | None = None
    render: RenderConfig = RenderConfig()
    identifier_model: str | None = None
    htr_model: str | None = None
    ocr_model: str | None = None
    lm: str | None = None
    lm_weight: float = 0.0
    char_bonus: float = 0.0
    beam: int = 16
    router_theta: float = 0.95

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = Path(path).parent
        r = raw.get("render", {})
        render = RenderConfig(
            stroke_width_range=tuple(r.get("stroke_width", (1.0, 6.0))),
            slant_range=tuple(r.get("slant", (-0.3, 0.3))),
            border_range=tuple(r.get("border", (2, 20))),
            target_h=int(r.get("target_h", 100)),
        )
        models = raw.get("models", {})
        dec = raw.get("decoder", {})

        def respath(v):
            return None if v is None else str(resolve_path(base, v))

        cfg = PipelineConfig(
            seed=int(raw.get("seed", 0)),
            degradation_graph=respath(raw.get("degradation_graph")),
            backgrounds_dir=respath(raw.get("backgrounds_dir")),
            render=render,
            identifier_model=respath(models.get("identifier")),
            htr_model=respath(models.get("htr")),
            ocr_model=respath(models.get("ocr")),
            lm=respath(raw.get("lm")),
            lm_weight=float(dec.get("lm_weight", 0.0)),
            char_bonus=float(dec.get("char_bonus", 0.0)),
            beam=int(dec.get("beam", 16)),
            router_theta=float(raw.get("router_theta", 0.95)),
        )
        for name in ("degradation_graph", "backgrounds_dir", "identifier_model",
                     "htr_model", "ocr_model", "lm"):
            val = getattr(cfg, name)
            if val is not None and not Path(val).exists():
                raise ConfigError(f"config references missing file: {name} = {val}")
        return cfg


def tree_digest(root: str | Path) -> str:
    """SHA-256 over relative paths and contents, sorted; identifies an
    output directory's exact contents."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode("utf-8"))
            h.update(p.read_bytes())
    return h.hexdigest()


def _load_graph(path: str | None) -> DegradationGraph:
    return load_graph(path) if path else default_graph()


def _load_backgrounds(dirpath: str | None) -> list[np.ndarray]:
    if not dirpath:
        return []
    out = []
    for p in sorted(Path(dirpath).iterdir()):
        if p.suffix.lower() in (".png", ".pgm", ".jpg", ".jpeg"):
            out.append(load_gray_array(p))
    return out


# --- dataset commands --------------------------------------------------------


def cmd_ink_split(args) -> int:
    skipped = Counter()
    out_samples = []
    total = 0
    for sample_id, sample in read_ink_file(args.input):
        total += 1
        try:
            lines = split_multiline(sample)
        except ValueError:
            skipped["unsegmented ink"] += 1
            continue
        if len(lines) == 1:
            out_samples.append((sample_id, lines[0]))
        else:
            out_samples.extend((f"{sample_id}#L{i}", line) for i, line in enumerate(lines))
    write_ink_file(args.out, out_samples)
    _summary(args, {"input": total, "output": len(out_samples), "skipped": dict(skipped)})
    return _skip_exit(total, sum(skipped.values()))


def cmd_ink_concat(args) -> int:
    pool = list(read_ink_file(args.input))
    if not pool:
        raise DataError("empty ink pool")
    cfg = ConcatConfig(target_range=(args.min_width, args.max_width))
    out = []
    for i in range(args.lines):
        rng = rng_for(args.seed, f"concat:{i}")
        order = rng.permutation(len(pool))
        samples = [pool[j][1] for j in order]
        line, _, _ = concat_inks_ex(samples, rng, cfg)
        out.append((f"long{i:06d}", line))
    write_ink_file(args.out, out)
    _summary(args, {"lines": len(out)})
    return 0


def cmd_synth_jitter(args) -> int:
    out = []
    for sample_id, sample in read_ink_file(args.input):
        rng = rng_for(args.seed, f"jitter:{sample_id}")
        new_ink = jitter_ink(sample.ink, rng, temperature=args.temperature)
        out.append((f"{sample_id}~j", type(sample)(new_ink, sample.transcription)))
    if not out:
        raise DataError("no ink samples to jitter")
    write_ink_file(args.out, out)
    _summary(args, {"jittered": len(out)})
    return 0


def cmd_render(args) -> int:
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    cfg = RenderConfig(target_h=args.height)
    records = []
    failed = 0
    total = 0
    for sample_id, sample in read_ink_file(args.input):
        total += 1
        try:
            rng = rng_for(args.seed, f"render:{sample_id}")
            img = render_ink(sample.ink, sample_render_params(rng, cfg))
            rel = f"images/{sample_id}.png"
            img.save(out_dir / rel)
            records.append(ManifestRecord(sample_id, "image", rel, sample.transcription,
                                          args.source))
        except ValueError:
            failed += 1
    write_manifest(out_dir / "manifest.jsonl", records)
    _summary(args, {"rendered": len(records), "failed": failed, "digest": tree_digest(out_dir)})
    return _skip_exit(total, failed)


def cmd_typeset_render(args) -> int:
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    scale = scale_for_height(args.height)
    records = []
    with open(args.corpus, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            text = line.strip()
            if not text:
                continue
            img, boxes = render_text_line_with_boxes(text, scale=scale)
            sample_id = f"typeset{i:06d}"
            rel = f"images/{sample_id}.png"
            img.save(out_dir / rel)
            words = tuple(WordRef(wtext, box) for wtext, box in boxes)
            records.append(ManifestRecord(sample_id, "image", rel, text,
                                          "synth-typeset", words))
    if not records:
        raise DataError("empty typeset corpus")
    write_manifest(out_dir / "manifest.jsonl", records)
    _summary(args, {"rendered": len(records), "digest": tree_digest(out_dir)})
    return 0


class _LazyFragments:
    """Fragment donors for the text-border step, rendered on first use so
    parallel workers stay deterministic and cheap."""

    def __init__(self, makers):
        self._makers = list(makers)
        self._cache: dict[int, np.ndarray] = {}

    def __len__(self):
        return len(self._makers)

    def __getitem__(self, i: int) -> np.ndarray:
        if i not in self._cache:
            self._cache[i] = self._makers[i]()
        return self._cache[i]


def _build_one(rec: ManifestRecord, base: Path, out_dir: Path, seed: int,
               graph: DegradationGraph, backgrounds, frag_makers, do_degrade: bool,
               render_cfg: RenderConfig, ink_index) -> tuple[ManifestRecord, Counter]:
    if rec.kind == "ink":
        sample = ink_index(rec)
        rng = rng_for(seed, f"render:{rec.id}")
        img = render_ink(sample.ink, sample_render_params(rng, render_cfg))
    else:
        img = GrayImage(load_gray_array(resolve_path(base, rec.path)))
    warnings: Counter = Counter()
    if do_degrade:
        ctx = DegradeContext(backgrounds=backgrounds,
                             fragments=_LazyFragments(frag_makers), warnings=warnings)
        img = degrade(img, graph, rng_for(seed, f"degrade:{rec.id}"), ctx)
    rel = f"images/{rec.id}.png"
    img.save(out_dir / rel)
    return ManifestRecord(rec.id, "image", rel, rec.transcription, rec.source,
                          rec.words, rec.extra), warnings


def cmd_dataset_build(args) -> int:
    base = Path(args.manifest).parent
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    graph = _load_graph(args.graph)
    backgrounds = _load_backgrounds(args.backgrounds)
    do_degrade = not args.no_degrade

    # Ink records point at an ink file; index each referenced file once.
    ink_files: dict[Path, dict] = {}

    def ink_index(rec: ManifestRecord):
        path = resolve_path(base, rec.path)
        if path not in ink_files:
            ink_files[path] = dict(read_ink_file(path))
        try:
            return ink_files[path][rec.id]
        except KeyError:
            raise DataError(f"ink id {rec.id!r} not found in {path}")

    all_ids: list[str] = []
    kept: list[ManifestRecord] = []
    for rec in iter_manifest(args.manifest):
        all_ids.append(rec.id)
        kept.append(rec)

    def frag_makers_for(rec_id: str):
        frng = rng_for(args.seed, f"fragments:{rec_id}")
        makers = []
        donors = [i for i in all_ids if i != rec_id] or all_ids
        for _ in range(min(2, len(donors))):
            donor_id = donors[int(frng.integers(0, len(donors)))]

            def make(donor_id=donor_id):
                donor = next(r for r in kept if r.id == donor_id)
                if donor.kind == "ink":
                    sample = ink_index(donor)
                    drng = rng_for(args.seed, f"render:{donor.id}")
                    return render_ink(sample.ink, sample_render_params(drng, RenderConfig(target_h=args.height))).array
                return load_gray_array(resolve_path(base, donor.path))

            makers.append(make)
        return makers

    render_cfg = RenderConfig(target_h=args.height)
    warnings: Counter = Counter()
    failures = 0
    results: list[ManifestRecord | None] = [None] * len(kept)

    def work(i_rec):
        i, rec = i_rec
        try:
            out_rec, warn = _build_one(rec, base, out_dir, args.seed, graph, backgrounds,
                                       frag_makers_for(rec.id), do_degrade, render_cfg,
                                       ink_index)
            return i, out_rec, warn, None
        except DataError:
            raise
        except Exception as exc:
            return i, None, Counter(), str(exc)

    # Preload ink files serially so parallel workers only read.
    for rec in kept:
        if rec.kind == "ink":
            ink_index(rec)

    chunk = max(1, args.jobs) * 8
    items = list(enumerate(kept))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            for lo in range(0, len(items), chunk):
                for i, out_rec, warn, err in ex.map(work, items[lo : lo + chunk]):
                    warnings.update(warn)
                    if err is not None:
                        failures += 1
                    else:
                        results[i] = out_rec
    else:
        for item in items:
            i, out_rec, warn, err = work(item)
            warnings.update(warn)
            if err is not None:
                failures += 1
            else:
                results[i] = out_rec

    write_manifest(out_dir / "manifest.jsonl", [r for r in results if r is not None])
    _summary(args, {
        "records": len(kept),
        "failed": failures,
        "step_warnings": dict(warnings),
        "digest": tree_digest(out_dir),
    })
    return _skip_exit(len(kept), failures)


def cmd_degrade(args) -> int:
    args.no_degrade = False
    return cmd_dataset_build(args)


# --- training commands -------------------------------------------------------


def _load_line_records(manifest_path: str):
    base = Path(manifest_path).parent
    records = []
    for rec in read_manifest(manifest_path, check_paths=True):
        if rec.kind != "image":
            raise DataError(f"record {rec.id!r}: training needs image records; run dataset-build first")
        img = GrayImage(load_gray_array(resolve_path(base, rec.path)))
        records.append((rec, img))
    if not records:
        raise DataError(f"empty manifest: {manifest_path}")
    return records


def cmd_train_recognizer(args) -> int:
    records = [(img, rec.transcription) for rec, img in _load_line_records(args.manifest)]
    dev = None
    if args.dev:
        dev = [(img, rec.transcription) for rec, img in _load_line_records(args.dev)]
    spec = recognizer_spec([], arch=args.arch, init_seed=args.seed)
    cfg = TrainConfig(lr0=args.lr, decay_rate=args.decay_rate, decay_steps=args.decay_steps,
                      batch_size=args.batch_size, max_steps=args.steps, seed=args.seed,
                      eval_every=args.eval_every, target_train_cer=args.target_cer)
    try:
        result = train_recognizer(records, spec, cfg, dev)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    save_model(result.model, args.out)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            for m in result.metrics:
                fh.write(json.dumps(m) + "\n")
    _summary(args, {"best_cer": result.best_cer, "best_step": result.best_step,
                    "params": result.model.num_params()})
    return 0


def cmd_train_identifier(args) -> int:
    scripts = args.scripts.split(",")
    data = []
    for rec, img in _load_line_records(args.manifest):
        style = "printed" if rec.source == "synth-typeset" else "handwritten"
        script = rec.extra.get("script", scripts[0])
        if script not in scripts:
            raise DataError(f"record {rec.id!r}: script {script!r} not in {scripts}")
        data.append((img, script, style))
    spec = ident_mod.identifier_spec(scripts, init_seed=args.seed)
    cfg = ident_mod.IdentTrainConfig(lr0=args.lr, max_steps=args.steps,
                                     batch_size=args.batch_size, seed=args.seed)
    graph, metrics = ident_mod.train_identifier(data, spec, cfg)
    save_model(graph, args.out)
    _summary(args, {"steps": len(metrics), "final_loss": metrics[-1]["loss"] if metrics else None})
    return 0


def cmd_build_lm(args) -> int:
    with open(args.corpus, "r", encoding="utf-8") as fh:
        try:
            lm = decode_mod.train_lm(fh, order=args.order)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    lm.save(args.out)
    if args.dump:
        Path(args.dump).write_text(lm.dump_text(), encoding="utf-8")
    _summary(args, {"order": lm.order, "vocab": len(lm.vocab)})
    return 0


def cmd_tune_decoder(args) -> int:
    model = load_model(args.model)
    lm = decode_mod.CharNGramLM.load(args.lm) if args.lm else None
    dev = []
    for rec, img in _load_line_records(args.manifest):
        x = preprocess(img, model.total_stride)
        frames = model.out_frames(x.shape[1])
        logits = model.forward(x[None])[0, :frames]
        dev.append((decode_mod.log_softmax(logits), rec.transcription))
    grid_lm = [float(v) for v in args.lm_grid.split(",")]
    grid_bonus = [float(v) for v in args.bonus_grid.split(",")]
    weights = decode_mod.tune_weights(dev, grid_lm, grid_bonus, model.alphabet, lm,
                                      beam=args.beam)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"lm_weight": weights.lm_weight, "char_bonus": weights.char_bonus}, fh)
        fh.write("\n")
    _summary(args, {"lm_weight": weights.lm_weight, "char_bonus": weights.char_bonus})
    return 0


# --- inference and evaluation --------------------------------------------------


class RecognizePipeline:
    """Loaded identifier + per-engine recognizers + decoder state."""

    def __init__(self, cfg: PipelineConfig):
        for name in ("identifier_model", "htr_model", "ocr_model"):
            if getattr(cfg, name) is None:
                raise ConfigError(f"recognize requires {name} in the config")
        self.identifier = load_model(cfg.identifier_model)
        self.engines = {
            ident_mod.ENGINE_HTR: load_model(cfg.htr_model),
            ident_mod.ENGINE_OCR: load_model(cfg.ocr_model),
        }
        self.lm = decode_mod.CharNGramLM.load(cfg.lm) if cfg.lm else None
        self.weights = decode_mod.DecoderWeights(cfg.lm_weight, cfg.char_bonus)
        self.beam = cfg.beam
        self.router = ident_mod.RouterConfig(cfg.router_theta)

    def run_line(self, line_id: str, img: GrayImage) -> dict:
        script_dist, style_dist = ident_mod.classify(img, self.identifier)
        engine = ident_mod.route(style_dist, self.router)
        model = self.engines[engine]
        x = preprocess(img, model.total_stride)
        frames = model.out_frames(x.shape[1])
        logits = model.forward(x[None])[0, :frames]
        result = decode_mod.beam_search(decode_mod.log_softmax(logits), model.alphabet,
                                        self.weights, self.beam, self.lm)
        script = self.identifier.scripts[int(np.argmax(script_dist))]
        return {
            "id": line_id,
            "engine": engine,
            "script": script,
            "p_handwritten": float(style_dist[ident_mod.STYLE_CLASSES.index("handwritten")]),
            "text": result.text,
            "confidence": result.confidence,
            "score": result.score,
        }


def cmd_recognize(args) -> int:
    cfg = PipelineConfig.load(args.config)
    pipeline = RecognizePipeline(cfg)
    outputs = []
    if args.image:
        outputs.append(pipeline.run_line(Path(args.image).stem,
                                         GrayImage(load_gray_array(args.image))))
    elif args.manifest:
        base = Path(args.manifest).parent
        for rec in iter_manifest(args.manifest):
            img = GrayImage(load_gray_array(resolve_path(base, rec.path)))
            outputs.append(pipeline.run_line(rec.id, img))
    else:
        raise ConfigError("recognize needs --image or --manifest")
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in outputs:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    _summary(args, {"lines": len(outputs)})
    return 0


def _read_records(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def cmd_evaluate(args) -> int:
    refs = {rec.id: rec for rec in read_manifest(args.ref)}
    preds = _read_records(args.pred)
    missing = [p["id"] for p in preds if p["id"] not in refs]
    if missing:
        raise DataError(f"prediction ids missing from reference manifest: {missing}")
    report: dict = {"mode": args.mode, "lines": len(preds)}
    if args.mode == "line":
        hyps = [p["text"] for p in preds]
        rtexts = [refs[p["id"]].transcription for p in preds]
        report["cer"] = cer(hyps, rtexts)
        report["wer"] = wer(hyps, rtexts)
        report["per_line"] = [
            {"id": p["id"], "cer": cer([h], [r]) if r else 0.0}
            for p, h, r in zip(preds, hyps, rtexts)
        ]
    else:
        pred_words, ref_words = [], []
        for p in preds:
            if "words" not in p:
                raise DataError(f"prediction {p['id']!r} has no word boxes for word mode")
            for w in p["words"]:
                pred_words.append(WordBox(w["text"], tuple(w["box"]), w.get("confidence", 1.0)))
            rec = refs[p["id"]]
            for w in rec.words or ():
                ref_words.append(WordBox(w.text, w.box))
        m = match_words(pred_words, ref_words)
        curve, auc = pr_auc(pred_words, ref_words)
        denom_p = max(len(pred_words), 1)
        denom_r = max(len(ref_words), 1)
        report.update({
            "precision": m.true_positives / denom_p,
            "recall": m.true_positives / denom_r,
            "auc": auc,
            "curve": [{"threshold": c.threshold, "precision": c.precision, "recall": c.recall}
                      for c in curve],
        })
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    keys = [k for k in ("cer", "wer", "precision", "recall", "auc") if k in report]
    print(" ".join(f"{k}={report[k]:.4f}" for k in keys))
    return 0


def cmd_model_summary(args) -> int:
    model = load_model(args.model)
    if hasattr(model, "summary"):
        print(model.summary())
    else:
        n = sum(p.data.size for p in model.named_params().values())
        print(f"model type: {model.spec['type']}\ntotal params: {n}")
    return 0


# --- wiring -------------------------------------------------------------------


def _summary(args, payload: dict) -> None:
    print(json.dumps(payload, ensure_ascii=False))


def _skip_exit(total: int, failed: int) -> int:
    return 3 if total and failed / total > 0.01 else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inkline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ink-split", help="split multi-line inks into single lines")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ink_split)

    p = sub.add_parser("ink-concat", help="build long lines from an ink pool")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lines", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-width", type=float, default=500.0)
    p.add_argument("--max-width", type=float, default=2500.0)
    p.set_defaults(fn=cmd_ink_concat)

    p = sub.add_parser("synth-jitter", help="style-jittered copies of recorded ink")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--temperature", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth_jitter)

    p = sub.add_parser("render", help="rasterize ink records to clean line images")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=100)
    p.add_argument("--source", default="online", help="source tag for the manifest")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("typeset-render", help="rasterize a text corpus with the embedded face")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--height", type=int, default=100)
    p.set_defaults(fn=cmd_typeset_render)

    for name, help_text in (("dataset-build", "render + degrade a manifest into training images"),
                            ("degrade", "degrade an image manifest")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--graph", default=None, help="degradation graph JSON (default: built-in)")
        p.add_argument("--backgrounds", default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--height", type=int, default=100)
        if name == "dataset-build":
            p.add_argument("--no-degrade", action="store_true")
            p.set_defaults(fn=cmd_dataset_build)
        else:
            p.set_defaults(fn=cmd_degrade)

    p = sub.add_parser("train-recognizer", help="train a line recognizer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--arch", choices=("grcl", "blstm"), default="grcl")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default=None)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--decay-rate", type=float, default=0.5)
    p.add_argument("--decay-steps", type=int, default=2000)
    p.add_argument("--eval-every", type=int, default=50)
    p.add_argument("--target-cer", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_recognizer)

    p = sub.add_parser("train-identifier", help="train the dual-head script/style classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scripts", default="Latn")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train_identifier)

    p = sub.add_parser("build-lm", help="train the character n-gram language model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--dump", default=None, help="also write a text-mode dump")
    p.set_defaults(fn=cmd_build_lm)

    p = sub.add_parser("tune-decoder", help="grid-search decoder weights on a dev set")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--lm", default=None)
    p.add_argument("--lm-grid", default="0,0.25,0.5,1.0")
    p.add_argument("--bonus-grid", default="-1,0,1")
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tune_decoder)

    p = sub.add_parser("recognize", help="classify, route, and decode line images")
    p.add_argument("--config", required=True)
    p.add_argument("--image", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_recognize)

    p = sub.add_parser("evaluate", help="score prediction records against a reference manifest")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--mode", choices=("line", "words"), default="line")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("model-summary", help="print a checkpoint's op list and parameter count")
    p.add_argument("--model", required=True)
    p.set_defaults(fn=cmd_model_summary)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
