"""Online-ink data model: strokes of timestamped points, line splitting,
height normalization, and long-line concatenation.

Coordinate convention: y grows downward (screen convention), matching
rasterization. All operations are pure; randomized ones take an explicit
seeded generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class Point:
    x: float
    y: float
    t: float = 0.0


@dataclass(frozen=True)
class Stroke:
    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("stroke must contain at least one point")
        ts = [p.t for p in self.points]
        if any(t < 0 for t in ts) or any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be non-negative and non-decreasing")


@dataclass(frozen=True)
class Ink:
    strokes: tuple[Stroke, ...]

    def __post_init__(self):
        if not self.strokes:
            raise ValueError("ink must contain at least one stroke")

    def points(self) -> Iterator[Point]:
        for s in self.strokes:
            yield from s.points

    def num_points(self) -> int:
        return sum(len(s.points) for s in self.strokes)


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("degenerate bbox: max < min")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class CharSpan:
    """One character's half-open point range in flattened (stroke, point) order."""

    label: str
    start: tuple[int, int]
    end: tuple[int, int]


@dataclass(frozen=True)
class LabeledInk:
    ink: Ink
    transcription: str
    spans: tuple[CharSpan, ...] | None = None

    def __post_init__(self):
        if self.spans is not None:
            joined = "".join(s.label for s in self.spans)
            squeezed = "".join(self.transcription.split())
            if joined != squeezed:
                raise ValueError(
                    "span labels do not match transcription (whitespace removed)"
                )


def make_ink(strokes: Sequence[Sequence[tuple[float, float] | tuple[float, float, float]]]) -> Ink:
    """Build an Ink from plain (x, y[, t]) tuples."""
    out = []
    for s in strokes:
        pts = []
        for p in s:
            if len(p) == 2:
                pts.append(Point(float(p[0]), float(p[1])))
            else:
                pts.append(Point(float(p[0]), float(p[1]), float(p[2])))
        out.append(Stroke(tuple(pts)))
    return Ink(tuple(out))


def bounding_box(ink: Ink) -> BBox:
    """Tight axis-aligned box over all points."""
    xs = [p.x for p in ink.points()]
    ys = [p.y for p in ink.points()]
    return BBox(min(xs), min(ys), max(xs), max(ys))


def _bbox_of_points(points: list[Point]) -> BBox:
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    return BBox(min(xs), min(ys), max(xs), max(ys))


def _span_points(ink: Ink, span: CharSpan) -> list[Point]:
    out = []
    for si, stroke in enumerate(ink.strokes):
        for pi, point in enumerate(stroke.points):
            if span.start <= (si, pi) < span.end:
                out.append(point)
    if not out:
        raise ValueError(f"span {span.label!r} covers no points")
    return out


def vertical_overlap_fraction(char_box: BBox, line_box: BBox, denom: str = "char") -> float:
    """Vertical-intersection fraction used by the line-splitting heuristic.

    ``denom`` selects the denominator: the new character's height ("char",
    the default) or the running line's height ("line"). A zero-height
    denominator counts as full overlap so the character stays on the line.
    """
    inter = min(char_box.y_max, line_box.y_max) - max(char_box.y_min, line_box.y_min)
    inter = max(0.0, inter)
    h = char_box.height if denom == "char" else line_box.height
    if h <= 0.0:
        return 1.0
    return inter / h


def split_multiline(
    sample: LabeledInk, overlap_threshold: float = 0.2, denom: str = "char"
) -> list[LabeledInk]:
    """Split a multi-line ink into single-line inks.

    Characters are scanned in span order while the running bounding box of
    the current line grows. A character whose vertical overlap fraction
    with the running box is at most ``overlap_threshold`` (inclusive)
    starts a new line. Every stroke point lands in exactly one output
    line; points not covered by any span travel with the most recent
    character.
    """
    if sample.spans is None:
        raise ValueError("unsegmented ink")
    ink = sample.ink
    spans = sample.spans

    line_of_span: list[int] = []
    line_box: BBox | None = None
    line_idx = 0
    for span in spans:
        cbox = _bbox_of_points(_span_points(ink, span))
        if line_box is None:
            line_box = cbox
        else:
            f = vertical_overlap_fraction(cbox, line_box, denom)
            if f <= overlap_threshold:
                line_idx += 1
                line_box = cbox
            else:
                line_box = BBox(
                    min(line_box.x_min, cbox.x_min),
                    min(line_box.y_min, cbox.y_min),
                    max(line_box.x_max, cbox.x_max),
                    max(line_box.y_max, cbox.y_max),
                )
        line_of_span.append(line_idx)
    n_lines = line_idx + 1
    if n_lines == 1:
        return [sample]

    # Assign every flattened point to a line: points inside a span take that
    # span's line, gap points take the line of the previous span.
    flat: list[tuple[int, int]] = [
        (si, pi)
        for si, stroke in enumerate(ink.strokes)
        for pi in range(len(stroke.points))
    ]
    point_line = np.zeros(len(flat), dtype=np.int64)
    current = 0
    span_iter = list(zip(spans, line_of_span))
    for i, key in enumerate(flat):
        for span, line in span_iter:
            if span.start <= key < span.end:
                current = line
                break
        point_line[i] = current

    # Split the transcription at line boundaries, preserving interior spaces.
    text = sample.transcription
    nonspace_pos = [i for i, ch in enumerate(text) if not ch.isspace()]
    assert len(nonspace_pos) == len(spans)
    line_texts = []
    k = 0
    for line in range(n_lines):
        labels_here = sum(1 for ln in line_of_span if ln == line)
        lo = nonspace_pos[k]
        hi = nonspace_pos[k + labels_here - 1]
        line_texts.append(text[lo : hi + 1])
        k += labels_here

    out: list[LabeledInk] = []
    flat_index = {key: i for i, key in enumerate(flat)}
    for line in range(n_lines):
        new_strokes: list[Stroke] = []
        new_spans: list[CharSpan] = []
        # Remap (stroke, point) keys for the points kept on this line.
        remap: dict[tuple[int, int], tuple[int, int]] = {}
        for si, stroke in enumerate(ink.strokes):
            run: list[Point] = []
            for pi, point in enumerate(stroke.points):
                if point_line[flat_index[(si, pi)]] == line:
                    remap[(si, pi)] = (len(new_strokes), len(run))
                    run.append(point)
                else:
                    if run:
                        new_strokes.append(Stroke(tuple(run)))
                        run = []
            if run:
                new_strokes.append(Stroke(tuple(run)))
        for span, span_line in span_iter:
            if span_line != line:
                continue
            keys = [k2 for k2 in flat if span.start <= k2 < span.end]
            first = remap[keys[0]]
            last = remap[keys[-1]]
            new_spans.append(CharSpan(span.label, first, (last[0], last[1] + 1)))
        out.append(LabeledInk(Ink(tuple(new_strokes)), line_texts[line], tuple(new_spans)))
    return out


def normalize_height(ink: Ink, target_h: float) -> Ink:
    """Uniformly scale so the bbox height equals ``target_h`` and translate
    the bbox min corner to the origin. Zero-height ink is scaled by width
    instead; zero-area ink is rejected."""
    if target_h <= 0:
        raise ValueError("target height must be positive")
    box = bounding_box(ink)
    if box.height > 0:
        extent = box.height
    elif box.width > 0:
        extent = box.width
    else:
        raise ValueError("cannot normalize zero-area ink")

    def tx(v: float, lo: float) -> float:
        # ratio-first so the max coordinate lands exactly on target_h
        return (v - lo) / extent * target_h

    strokes = tuple(
        Stroke(tuple(Point(tx(p.x, box.x_min), tx(p.y, box.y_min), p.t) for p in s.points))
        for s in ink.strokes
    )
    return Ink(strokes)


def translate(ink: Ink, dx: float, dy: float) -> Ink:
    return Ink(
        tuple(
            Stroke(tuple(Point(p.x + dx, p.y + dy, p.t) for p in s.points))
            for s in ink.strokes
        )
    )


@dataclass(frozen=True)
class ConcatConfig:
    """Long-line concatenation parameters (ink units at height 100)."""

    gap_range: tuple[float, float] = (10.0, 60.0)
    target_range: tuple[float, float] = (500.0, 2500.0)
    height: float = 100.0


def concat_inks_ex(
    samples: Sequence[LabeledInk],
    rng: np.random.Generator,
    cfg: ConcatConfig = ConcatConfig(),
) -> tuple[LabeledInk, float, int]:
    """Concatenate single-line samples into one long line.

    Draws a target width uniformly from ``cfg.target_range``, normalizes
    each sample to ``cfg.height``, and appends samples left to right with
    uniform random gaps until the running width first reaches the target
    (or the supply runs out). Returns (line, target_width, samples_used);
    the transcription is the used labels joined by single spaces.
    """
    if not samples:
        raise ValueError("empty sample list")
    target = float(rng.uniform(*cfg.target_range))
    strokes: list[Stroke] = []
    labels: list[str] = []
    cursor = 0.0
    used = 0
    for sample in samples:
        if used > 0:
            if cursor >= target:
                break
            cursor += float(rng.uniform(*cfg.gap_range))
        norm = normalize_height(sample.ink, cfg.height)
        width = bounding_box(norm).width
        placed = translate(norm, cursor, 0.0)
        strokes.extend(placed.strokes)
        labels.append(sample.transcription)
        cursor += width
        used += 1
    line = LabeledInk(Ink(tuple(strokes)), " ".join(labels))
    return line, target, used


def concat_inks(
    samples: Sequence[LabeledInk],
    rng: np.random.Generator,
    cfg: ConcatConfig = ConcatConfig(),
) -> LabeledInk:
    return concat_inks_ex(samples, rng, cfg)[0]


# --- ink record file format (JSONL, UTF-8) ---------------------------------


def labeled_ink_to_record(sample: LabeledInk, sample_id: str) -> dict:
    rec = {
        "id": sample_id,
        "transcription": sample.transcription,
        "strokes": [[[p.x, p.y, p.t] for p in s.points] for s in sample.ink.strokes],
    }
    if sample.spans is not None:
        rec["spans"] = [
            {"label": s.label, "start": list(s.start), "end": list(s.end)}
            for s in sample.spans
        ]
    return rec


def record_to_labeled_ink(rec: dict) -> tuple[str, LabeledInk]:
    ink = make_ink(rec["strokes"])
    spans = None
    if "spans" in rec and rec["spans"] is not None:
        spans = tuple(
            CharSpan(s["label"], tuple(s["start"]), tuple(s["end"]))
            for s in rec["spans"]
        )
    return rec["id"], LabeledInk(ink, rec["transcription"], spans)


def write_ink_file(path: str | Path, samples: Iterable[tuple[str, LabeledInk]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id, sample in samples:
            fh.write(json.dumps(labeled_ink_to_record(sample, sample_id), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_ink_file(path: str | Path) -> Iterator[tuple[str, LabeledInk]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield record_to_labeled_ink(json.loads(line))
