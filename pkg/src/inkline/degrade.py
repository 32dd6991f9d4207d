"""Probabilistic image degradation pipeline.

A degradation graph is a set of alternative branches, each an ordered
list of steps with execution probabilities. One branch is sampled per
image, then its steps run in order, each gated by its own probability.
The default graph (three branches with probabilities 0.7 / 0.2 / 0.1)
ships as a JSON config file, not code.

All randomness flows through the caller's generator, so a fixed seed
gives bit-identical output regardless of worker count or sample order.
A step that fails on a degenerate image is skipped and counted, never
aborting the pipeline.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .image import GrayImage, resize, resize_to_height

# Default per-kind parameter ranges. Probabilities and step order come from
# the graph config; these only shape how an executed step draws its knobs.
STEP_DEFAULTS: dict[str, dict] = {
    "border": {"margin_pct": [1, 10]},
    "outline": {"value": 0},
    "transform": {"rotate_deg": 2.0, "projective_jitter": 0.02, "elastic_sigma": 2.0, "elastic_grid": 8},
    "background": {},
    "scale": {"factor": [0.5, 1.5]},
    "offset": {"delta": [-30, 30]},
    "contrast": {"gain": [0.5, 1.5]},
    "blur": {"sigma": [0.5, 1.5]},
    "noise": {"sigma": [2.0, 16.0]},
    "gradient": {"amplitude": [10, 60]},
    "quantize": {"levels": [4, 32]},
    "invert": {},
    "crop": {"max_side_frac": 0.2},
    "aspect_ratio": {"factor": [0.75, 1.25]},
    "text_color": {"gain": [0.4, 1.0]},
    "jpeg": {"quality": [20, 80]},
    "fix_height": {"height": 40},
    "text_border": {"strip_frac": [0.1, 0.25]},
    "background_bd": {},
    "scale_small": {"height": [20, 40]},
}


@dataclass(frozen=True)
class StepSpec:
    kind: str
    prob: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STEP_DEFAULTS:
            raise ValueError(f"unknown degradation step kind: {self.kind!r}")
        if not (0.0 <= self.prob <= 1.0):
            raise ValueError("step probability must be within [0, 1]")

    def param(self, name: str):
        if name in self.params:
            return self.params[name]
        return STEP_DEFAULTS[self.kind][name]


@dataclass(frozen=True)
class DegradationGraph:
    branches: tuple[tuple[float, tuple[StepSpec, ...]], ...]

    def __post_init__(self):
        total = sum(p for p, _ in self.branches)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch probabilities sum to {total}, not 1")

    @staticmethod
    def from_dict(d: dict) -> "DegradationGraph":
        branches = []
        for b in d["branches"]:
            steps = tuple(
                StepSpec(s["kind"], float(s["prob"]), s.get("params", {}))
                for s in b["steps"]
            )
            branches.append((float(b["prob"]), steps))
        return DegradationGraph(tuple(branches))

    def to_dict(self) -> dict:
        return {
            "format": "inkline-degradation-graph",
            "version": 1,
            "branches": [
                {
                    "prob": p,
                    "steps": [
                        {"kind": s.kind, "prob": s.prob, **({"params": s.params} if s.params else {})}
                        for s in steps
                    ],
                }
                for p, steps in self.branches
            ],
        }


def load_graph(path: str | Path) -> DegradationGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return DegradationGraph.from_dict(json.load(fh))


def default_graph() -> DegradationGraph:
    """The stock three-branch graph, loaded from the packaged config."""
    text = resources.files("inkline.data").joinpath("default_degradation.json").read_text("utf-8")
    return DegradationGraph.from_dict(json.loads(text))


@dataclass
class DegradeContext:
    """Shared read-only stores plus mutable warning counters."""

    backgrounds: list[np.ndarray] = field(default_factory=list)
    fragments: list[np.ndarray] = field(default_factory=list)
    warnings: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class DegradeTrace:
    branch: int
    executed: tuple[tuple[str, bool], ...]


def degrade(img: GrayImage, graph: DegradationGraph, rng: np.random.Generator,
            ctx: DegradeContext | None = None) -> GrayImage:
    return degrade_with_trace(img, graph, rng, ctx)[0]


def degrade_with_trace(img: GrayImage, graph: DegradationGraph, rng: np.random.Generator,
                       ctx: DegradeContext | None = None) -> tuple[GrayImage, DegradeTrace]:
    if ctx is None:
        ctx = DegradeContext()
    probs = np.array([p for p, _ in graph.branches])
    branch = int(rng.choice(len(probs), p=probs / probs.sum()))
    arr = img.array
    executed = []
    for step in graph.branches[branch][1]:
        run = step.prob >= 1.0 or (step.prob > 0.0 and rng.random() < step.prob)
        if run:
            try:
                arr = apply_step_array(arr, step, rng, ctx)
            except Exception:
                ctx.warnings[step.kind] += 1
                run = False
        executed.append((step.kind, run))
    return GrayImage(arr), DegradeTrace(branch, tuple(executed))


def apply_step(img: GrayImage, step: StepSpec, rng: np.random.Generator,
               ctx: DegradeContext | None = None) -> GrayImage:
    return GrayImage(apply_step_array(img.array, step, rng, ctx or DegradeContext()))


def apply_step_array(arr: np.ndarray, step: StepSpec, rng: np.random.Generator,
                     ctx: DegradeContext) -> np.ndarray:
    return _STEP_FNS[step.kind](arr, step, rng, ctx)


# --- helpers ----------------------------------------------------------------


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def _edge_background(arr: np.ndarray) -> float:
    """Local background estimate: median over the one-pixel image rim."""
    h, w = arr.shape
    if h <= 2 or w <= 2:
        return float(np.median(arr))
    rim = np.concatenate([arr[0], arr[-1], arr[1:-1, 0], arr[1:-1, -1]])
    return float(np.median(rim))


def _uniform(rng, rangespec) -> float:
    lo, hi = float(rangespec[0]), float(rangespec[1])
    return lo if lo == hi else float(rng.uniform(lo, hi))


def _uniform_int(rng, rangespec) -> int:
    lo, hi = int(rangespec[0]), int(rangespec[1])
    return lo if lo == hi else int(rng.integers(lo, hi + 1))


def _smooth_field(rng: np.random.Generator, h: int, w: int, grid: int = 6) -> np.ndarray:
    """Zero-mean smooth random field in [-1, 1] via bilinear grid upsampling."""
    gh, gw = max(2, grid), max(2, grid)
    coarse = rng.uniform(-1.0, 1.0, size=(gh, gw))
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = coarse[y0[:, None], x0[None, :]] * (1 - fx) + coarse[y0[:, None], x1[None, :]] * fx
    bot = coarse[y1[:, None], x0[None, :]] * (1 - fx) + coarse[y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bot * fy


def paper_texture(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Procedural paper-like background: bright base, soft blotches, speckle."""
    base = rng.uniform(225.0, 250.0)
    blotch = _smooth_field(rng, h, w) * rng.uniform(4.0, 14.0)
    speckle = rng.normal(0.0, 2.0, size=(h, w))
    return _to_u8(base + blotch + speckle)


def whiteboard_texture(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Very bright, slightly graded background resembling a whiteboard."""
    base = rng.uniform(240.0, 253.0)
    grade = _smooth_field(rng, h, w, grid=3) * rng.uniform(2.0, 8.0)
    return _to_u8(base + grade)


# --- step implementations ---------------------------------------------------


def _step_border(arr, step, rng, ctx):
    h, w = arr.shape
    lo, hi = step.param("margin_pct")
    margins = [max(1, int(round(h * _uniform_int(rng, (lo, hi)) / 100.0))) for _ in range(4)]
    top, bottom, left, right = margins
    bg = _edge_background(arr)
    out = np.full((h + top + bottom, w + left + right), bg, dtype=np.float64)
    out[top : top + h, left : left + w] = arr
    return _to_u8(out)


def _step_outline(arr, step, rng, ctx):
    out = arr.copy()
    value = int(step.param("value"))
    out[0, :] = value
    out[-1, :] = value
    out[:, 0] = value
    out[:, -1] = value
    return out


def _map_coords(arr: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    bg = _edge_background(arr)
    warped = ndimage.map_coordinates(
        arr.astype(np.float64), [yy, xx], order=1, mode="constant", cval=bg
    )
    return _to_u8(warped)


def _step_transform(arr, step, rng, ctx):
    h, w = arr.shape
    kind = int(rng.integers(0, 3))
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if kind == 0:  # rotation about the center
        limit = float(step.param("rotate_deg"))
        theta = math.radians(rng.uniform(-limit, limit))
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        c, s = math.cos(theta), math.sin(theta)
        xs = xx - cx
        ys = yy - cy
        return _map_coords(arr, cy + s * xs + c * ys, cx + c * xs - s * ys)
    if kind == 1:  # projective: jitter the corners, inverse-map through it
        jit = float(step.param("projective_jitter"))
        src = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
        dst = src + rng.uniform(-1, 1, size=(4, 2)) * [jit * w, jit * h]
        hom = _homography(dst, src)  # output corner -> input corner
        denom = hom[2, 0] * xx + hom[2, 1] * yy + hom[2, 2]
        xs = (hom[0, 0] * xx + hom[0, 1] * yy + hom[0, 2]) / denom
        ys = (hom[1, 0] * xx + hom[1, 1] * yy + hom[1, 2]) / denom
        return _map_coords(arr, ys, xs)
    # smooth elastic warp from a coarse displacement grid
    sigma = float(step.param("elastic_sigma"))
    grid = int(step.param("elastic_grid"))
    dy = _smooth_field(rng, h, w, grid) * sigma
    dx = _smooth_field(rng, h, w, grid) * sigma
    return _map_coords(arr, yy + dy, xx + dx)


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 projective map taking each src point to its dst point."""
    rows = []
    rhs = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        rhs.append(u)
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        rhs.append(v)
    sol = np.linalg.solve(np.array(rows, dtype=np.float64), np.array(rhs, dtype=np.float64))
    return np.append(sol, 1.0).reshape(3, 3)


def _step_background(arr, step, rng, ctx):
    h, w = arr.shape
    if ctx.backgrounds:
        bg = ctx.backgrounds[int(rng.integers(0, len(ctx.backgrounds)))]
        if bg.shape[0] < h or bg.shape[1] < w:
            bg = resize(bg, max(h, bg.shape[0], 1), max(w, bg.shape[1], 1))
        y0 = int(rng.integers(0, bg.shape[0] - h + 1))
        x0 = int(rng.integers(0, bg.shape[1] - w + 1))
        patch = bg[y0 : y0 + h, x0 : x0 + w]
    else:
        patch = paper_texture(rng, h, w)
    return np.minimum(arr, patch)


def _step_scale(arr, step, rng, ctx):
    f = _uniform(rng, step.param("factor"))
    h = max(1, int(round(arr.shape[0] * f)))
    w = max(1, int(round(arr.shape[1] * f)))
    return resize(arr, h, w)


def _step_offset(arr, step, rng, ctx):
    delta = _uniform(rng, step.param("delta"))
    return _to_u8(arr.astype(np.float64) + delta)


def _step_contrast(arr, step, rng, ctx):
    gain = _uniform(rng, step.param("gain"))
    mean = float(arr.mean())
    return _to_u8(mean + gain * (arr.astype(np.float64) - mean))


def _step_blur(arr, step, rng, ctx):
    sigma = _uniform(rng, step.param("sigma"))
    return _to_u8(ndimage.gaussian_filter(arr.astype(np.float64), sigma, mode="nearest"))


def _step_noise(arr, step, rng, ctx):
    sigma = _uniform(rng, step.param("sigma"))
    return _to_u8(arr.astype(np.float64) + rng.normal(0.0, sigma, size=arr.shape))


def _step_gradient(arr, step, rng, ctx):
    h, w = arr.shape
    amp = _uniform(rng, step.param("amplitude"))
    theta = rng.uniform(0.0, 2.0 * math.pi)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    proj = xx * math.cos(theta) + yy * math.sin(theta)
    span = proj.max() - proj.min()
    if span <= 0:
        return arr
    ramp = (proj - proj.min()) / span - 0.5
    return _to_u8(arr.astype(np.float64) + amp * ramp)


def _step_quantize(arr, step, rng, ctx):
    levels = _uniform_int(rng, step.param("levels"))
    if levels < 2:
        levels = 2
    q = np.rint(arr.astype(np.float64) * (levels - 1) / 255.0)
    return _to_u8(q * 255.0 / (levels - 1))


def _step_invert(arr, step, rng, ctx):
    return (255 - arr.astype(np.int16)).astype(np.uint8)


def _step_crop(arr, step, rng, ctx):
    h, w = arr.shape
    mx = float(step.param("max_side_frac"))
    top = int(math.floor(h * rng.uniform(0, mx)))
    bottom = int(math.floor(h * rng.uniform(0, mx)))
    left = int(math.floor(w * rng.uniform(0, mx)))
    right = int(math.floor(w * rng.uniform(0, mx)))
    if h - top - bottom < 1 or w - left - right < 1:
        raise ValueError("crop would remove the whole image")
    return arr[top : h - bottom, left : w - right]


def _step_aspect_ratio(arr, step, rng, ctx):
    sy = _uniform(rng, step.param("factor"))
    sx = _uniform(rng, step.param("factor"))
    h = max(1, int(round(arr.shape[0] * sy)))
    w = max(1, int(round(arr.shape[1] * sx)))
    return resize(arr, h, w)


def _step_text_color(arr, step, rng, ctx):
    gain = _uniform(rng, step.param("gain"))
    bg = _edge_background(arr)
    return _to_u8(bg - gain * (bg - arr.astype(np.float64)))


_JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _step_jpeg(arr, step, rng, ctx):
    """Blockwise DCT quantization with the standard luminance table.

    Self-contained so artifacts are bit-reproducible across platforms;
    no image codec is involved.
    """
    quality = _uniform_int(rng, step.param("quality"))
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.clip(np.floor((_JPEG_LUMA_TABLE * scale + 50.0) / 100.0), 1, 255)

    h, w = arr.shape
    ph = (8 - h % 8) % 8
    pw = (8 - w % 8) % 8
    padded = np.pad(arr.astype(np.float64) - 128.0, ((0, ph), (0, pw)), mode="edge")
    hh, ww = padded.shape
    blocks = padded.reshape(hh // 8, 8, ww // 8, 8).transpose(0, 2, 1, 3)
    coef = dctn(blocks, type=2, norm="ortho", axes=(-2, -1))
    coef = np.rint(coef / table) * table
    rec = idctn(coef, type=2, norm="ortho", axes=(-2, -1))
    out = rec.transpose(0, 2, 1, 3).reshape(hh, ww)[:h, :w] + 128.0
    return _to_u8(out)


def _step_fix_height(arr, step, rng, ctx):
    return resize_to_height(arr, int(step.param("height")))


def _step_text_border(arr, step, rng, ctx):
    h, w = arr.shape
    lo, hi = step.param("strip_frac")
    donors = ctx.fragments if ctx.fragments else [arr]
    out = arr.copy()
    edges = [e for e in ("top", "bottom") if rng.random() < 0.5]
    if not edges:
        edges = ["top"]
    for edge in edges:
        strip_h = max(1, int(round(h * rng.uniform(lo, hi))))
        donor = donors[int(rng.integers(0, len(donors)))]
        # a horizontal slice of the donor, stretched across the full width
        sh = max(1, min(donor.shape[0], strip_h * 2))
        y0 = int(rng.integers(0, donor.shape[0] - sh + 1))
        frag = resize(donor[y0 : y0 + sh, :], strip_h, w)
        if edge == "top":
            out[:strip_h, :] = np.minimum(out[:strip_h, :], frag)
        else:
            out[h - strip_h :, :] = np.minimum(out[h - strip_h :, :], frag)
    return out


def _step_background_bd(arr, step, rng, ctx):
    return np.minimum(arr, whiteboard_texture(rng, *arr.shape))


def _step_scale_small(arr, step, rng, ctx):
    target = _uniform_int(rng, step.param("height"))
    return resize_to_height(arr, target)


_STEP_FNS = {
    "border": _step_border,
    "outline": _step_outline,
    "transform": _step_transform,
    "background": _step_background,
    "scale": _step_scale,
    "offset": _step_offset,
    "contrast": _step_contrast,
    "blur": _step_blur,
    "noise": _step_noise,
    "gradient": _step_gradient,
    "quantize": _step_quantize,
    "invert": _step_invert,
    "crop": _step_crop,
    "aspect_ratio": _step_aspect_ratio,
    "text_color": _step_text_color,
    "jpeg": _step_jpeg,
    "fix_height": _step_fix_height,
    "text_border": _step_text_border,
    "background_bd": _step_background_bd,
    "scale_small": _step_scale_small,
}
