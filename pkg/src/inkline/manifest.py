"""Dataset manifests: one JSON record per line, streamed lazily.

Records reference either an ink file entry or an image on disk, carry
the transcription and a source tag, and may attach word boxes for
word-level evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

SOURCE_TAGS = ("online", "long-lines", "synth-online", "synth-typeset",
               "labeled-image", "historic")

KINDS = ("ink", "image")


@dataclass(frozen=True)
class WordRef:
    text: str
    box: tuple[float, float, float, float]


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    kind: str
    path: str
    transcription: str
    source: str = "labeled-image"
    words: tuple[WordRef, ...] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        if self.source not in SOURCE_TAGS:
            raise ValueError(f"unknown source tag {self.source!r}")

    def to_json(self) -> dict:
        d = {"id": self.id, "kind": self.kind, "path": self.path,
             "transcription": self.transcription, "source": self.source}
        if self.words is not None:
            d["words"] = [{"text": w.text, "box": list(w.box)} for w in self.words]
        d.update(self.extra)
        return d

    @staticmethod
    def from_json(d: dict) -> "ManifestRecord":
        words = None
        if d.get("words") is not None:
            words = tuple(WordRef(w["text"], tuple(w["box"])) for w in d["words"])
        extra = {k: v for k, v in d.items()
                 if k not in ("id", "kind", "path", "transcription", "source", "words")}
        return ManifestRecord(d["id"], d["kind"], d["path"], d["transcription"],
                              d.get("source", "labeled-image"), words, extra)


def iter_manifest(path: str | Path) -> Iterator[ManifestRecord]:
    """Stream records one line at a time; memory stays O(1) in the
    manifest size."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield ManifestRecord.from_json(json.loads(line))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad manifest record: {exc}") from exc


def read_manifest(path: str | Path, check_paths: bool = False) -> list[ManifestRecord]:
    """Load all records, enforcing unique ids (and optionally that every
    referenced path resolves relative to the manifest)."""
    base = Path(path).parent
    records = []
    seen: set[str] = set()
    for rec in iter_manifest(path):
        if rec.id in seen:
            raise ValueError(f"duplicate manifest id {rec.id!r}")
        seen.add(rec.id)
        if check_paths and not resolve_path(base, rec.path).exists():
            raise FileNotFoundError(f"manifest path missing for {rec.id!r}: {rec.path}")
        records.append(rec)
    return records


def resolve_path(base: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def write_manifest(path: str | Path, records: Iterable[ManifestRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n
