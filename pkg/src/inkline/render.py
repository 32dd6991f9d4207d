"""Rasterize ink into clean grayscale line images.

Strokes are drawn as unions of capsules (segments with round caps and
joins); per-pixel coverage comes from the signed distance to the nearest
segment, which gives deterministic anti-aliased edges without any
platform graphics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import GrayImage
from .ink import Ink, bounding_box

MAX_RENDER_WIDTH = 1 << 15


@dataclass(frozen=True)
class RenderConfig:
    stroke_width_range: tuple[float, float] = (1.0, 6.0)
    slant_range: tuple[float, float] = (-0.3, 0.3)
    border_range: tuple[int, int] = (2, 20)
    target_h: int = 100

    def validate(self) -> None:
        if not (0 < self.stroke_width_range[0] <= self.stroke_width_range[1]):
            raise ValueError("invalid stroke width range")
        if self.slant_range[0] > self.slant_range[1]:
            raise ValueError("invalid slant range")
        if not (0 <= self.border_range[0] <= self.border_range[1]):
            raise ValueError("invalid border range")
        if self.target_h < 4:
            raise ValueError("target height too small")


@dataclass(frozen=True)
class RenderParams:
    stroke_width: float
    slant: float
    border: int
    target_h: int = 100

    def __post_init__(self):
        if self.stroke_width <= 0:
            raise ValueError("stroke width must be positive")
        if self.border < 0:
            raise ValueError("border must be non-negative")


def sample_render_params(rng: np.random.Generator, cfg: RenderConfig = RenderConfig()) -> RenderParams:
    """Draw stroke width, slant, and border uniformly from the config ranges."""
    cfg.validate()
    stroke_width = float(rng.uniform(*cfg.stroke_width_range))
    slant = float(rng.uniform(*cfg.slant_range))
    border = int(rng.integers(cfg.border_range[0], cfg.border_range[1] + 1))
    return RenderParams(stroke_width, slant, border, cfg.target_h)


def _transformed_polylines(ink: Ink, p: RenderParams) -> tuple[list[np.ndarray], float, float]:
    """Shear, scale to the bordered glyph box, and translate to pixel space."""
    pts = np.array([[pt.x, pt.y] for pt in ink.points()], dtype=np.float64)
    y_max = pts[:, 1].max()
    # shear before scaling: x' = x + slant * (y_max - y)
    sheared_x = pts[:, 0] + p.slant * (y_max - pts[:, 1])
    xs, ys = sheared_x, pts[:, 1]
    x_min, x_max = xs.min(), xs.max()
    y_min, y_hi = ys.min(), ys.max()
    glyph_h = float(p.target_h - 2 * p.border)
    if glyph_h <= 0:
        raise ValueError("border leaves no room for the glyph")
    extent = y_hi - y_min if y_hi > y_min else x_max - x_min
    if extent <= 0:
        raise ValueError("degenerate ink: zero-area bounding box")
    scale = glyph_h / extent

    polylines = []
    i = 0
    for stroke in ink.strokes:
        n = len(stroke.points)
        seg = np.empty((n, 2), dtype=np.float64)
        seg[:, 0] = (sheared_x[i : i + n] - x_min) * scale + p.border
        seg[:, 1] = (pts[i : i + n, 1] - y_min) * scale + p.border
        polylines.append(seg)
        i += n
    glyph_w = (x_max - x_min) * scale
    return polylines, glyph_w, glyph_h


def render_ink(ink: Ink, p: RenderParams) -> GrayImage:
    """Render black-on-white at image height ``p.target_h``.

    Output width is the sheared glyph width plus the border on both
    sides. Two calls with identical inputs produce bit-identical images.
    """
    polylines, glyph_w, _ = _transformed_polylines(ink, p)
    width = int(math.ceil(glyph_w)) + 2 * p.border
    height = p.target_h
    if width < 1:
        raise ValueError("rendered width is below one pixel")
    if width > MAX_RENDER_WIDTH:
        raise ValueError("rendered width exceeds the supported maximum")

    coverage = np.zeros((height, width), dtype=np.float64)
    radius = p.stroke_width / 2.0
    pad = radius + 1.0
    for poly in polylines:
        if len(poly) == 1:
            segs = [(poly[0], poly[0])]
        else:
            segs = list(zip(poly[:-1], poly[1:]))
        for a, b in segs:
            x_lo = max(0, int(math.floor(min(a[0], b[0]) - pad)))
            x_hi = min(width - 1, int(math.ceil(max(a[0], b[0]) + pad)))
            y_lo = max(0, int(math.floor(min(a[1], b[1]) - pad)))
            y_hi = min(height - 1, int(math.ceil(max(a[1], b[1]) + pad)))
            if x_lo > x_hi or y_lo > y_hi:
                continue
            ys = np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5
            xs = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
            px, py = np.meshgrid(xs, ys)
            d = _segment_distance(px, py, a, b)
            cov = np.clip(radius - d + 0.5, 0.0, 1.0)
            region = coverage[y_lo : y_hi + 1, x_lo : x_hi + 1]
            np.maximum(region, cov, out=region)

    pixels = np.rint(255.0 * (1.0 - coverage)).astype(np.uint8)
    return GrayImage(pixels)


def _segment_distance(px: np.ndarray, py: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab[0] ** 2 + ab[1] ** 2)
    if denom == 0.0:
        return np.hypot(px - a[0], py - a[1])
    t = ((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))
