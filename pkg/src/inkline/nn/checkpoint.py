"""Versioned checkpoint container: named parameter arrays plus the graph
spec (including the alphabet) in one `.npz` file."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "inkline-checkpoint"
VERSION = 1

# spec["type"] -> builder(spec) -> model; populated by the model modules
BUILDERS: dict[str, callable] = {}


def register_builder(kind: str, builder) -> None:
    BUILDERS[kind] = builder


def save_model(model, path: str | Path) -> None:
    meta = {"format": FORMAT, "version": VERSION, "spec": model.spec}
    arrays = {name: p.data for name, p in model.named_params().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
                 **arrays)


def load_model(path: str | Path):
    from .model import Recognizer  # default builder registration

    BUILDERS.setdefault("recognizer", Recognizer)
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format") != FORMAT:
            raise ValueError(f"not a model checkpoint: {path}")
        if meta.get("version") != VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        spec = meta["spec"]
        builder = BUILDERS.get(spec["type"])
        if builder is None:
            raise ValueError(f"no builder registered for model type {spec['type']!r}")
        model = builder(spec)
        for name, p in model.named_params().items():
            if name not in data:
                raise ValueError(f"checkpoint missing parameter {name!r}")
            if data[name].shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name!r}")
            p.data = data[name].copy()
    return model
