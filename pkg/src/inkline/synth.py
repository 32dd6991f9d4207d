"""Stroke-synthesis delta math: temperature-controlled sampling from a
bivariate mixture density output, style-embedding pooling, and feature
conditioning.

Training a full synthesis network is out of scope; ``jitter_ink`` wraps
the sampler around recorded strokes to produce style-jittered variants
for pipeline testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ink import Ink, Point, Stroke

# Below this, sampling is numerically indistinguishable from the limit, so
# the exact limit is returned: the argmax-weight component mean with a
# deterministic pen state.
TEMPERATURE_LIMIT = 1e-8


@dataclass(frozen=True)
class MDNParams:
    """Bivariate Gaussian mixture with an end-of-stroke probability."""

    weights: np.ndarray   # (K,) simplex
    means: np.ndarray     # (K, 2)
    stds: np.ndarray      # (K, 2), positive
    corr: np.ndarray      # (K,), within (-1, 1)
    pen_lift: float       # end-of-stroke probability, within (0, 1)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))
        object.__setattr__(self, "corr", np.asarray(self.corr, dtype=np.float64))
        if abs(w.sum() - 1.0) > 1e-6 or (w < 0).any():
            raise ValueError("mixture weights must form a simplex")
        if (self.stds <= 0).any():
            raise ValueError("standard deviations must be positive")
        if (np.abs(self.corr) >= 1).any():
            raise ValueError("correlations must lie strictly inside (-1, 1)")
        if not (0.0 < self.pen_lift < 1.0):
            raise ValueError("pen-lift probability must lie strictly inside (0, 1)")


def component_probs(p: MDNParams, temperature: float) -> np.ndarray:
    """Mixture selection probabilities at the given temperature:
    softmax(log weights / T)."""
    logw = np.log(np.maximum(p.weights, 1e-300)) / temperature
    logw -= logw.max()
    e = np.exp(logw)
    return e / e.sum()


def sample_mdn_ex(p: MDNParams, temperature: float, rng: np.random.Generator
                  ) -> tuple[float, float, int, int]:
    """Like ``sample_mdn`` but also returns the drawn component index."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if temperature <= TEMPERATURE_LIMIT:
        k = int(np.argmax(p.weights))
        return float(p.means[k, 0]), float(p.means[k, 1]), int(p.pen_lift >= 0.5), k

    k = int(rng.choice(len(p.weights), p=component_probs(p, temperature)))
    z1, z2 = rng.standard_normal(2)
    rho = float(p.corr[k])
    scale = math.sqrt(temperature)
    dx = float(p.means[k, 0] + p.stds[k, 0] * scale * z1)
    dy = float(p.means[k, 1] + p.stds[k, 1] * scale * (rho * z1 + math.sqrt(1 - rho * rho) * z2))
    lift = int(rng.random() < p.pen_lift)
    return dx, dy, lift, k


def sample_mdn(p: MDNParams, temperature: float, rng: np.random.Generator
               ) -> tuple[float, float, int]:
    """Draw (dx, dy, pen_lift) at the given sampling temperature.

    The component is drawn from the temperature-sharpened weights and the
    offsets from its bivariate Gaussian with standard deviations scaled
    by sqrt(T), so offset variance scales linearly in T. As T approaches
    zero the draw collapses to the argmax-weight component mean with
    pen_lift = 1 iff the end-of-stroke probability is at least one half.
    """
    return sample_mdn_ex(p, temperature, rng)[:3]


def style_embed(outputs: Sequence[np.ndarray]) -> np.ndarray:
    """Fixed-length style embedding: the elementwise sum over time of the
    embedding network's output sequence (label-independent by design)."""
    outputs = [np.asarray(o, dtype=np.float64) for o in outputs]
    if not outputs:
        raise ValueError("empty output sequence")
    total = outputs[0].copy()
    for o in outputs[1:]:
        if o.shape != total.shape:
            raise ValueError("inconsistent vector shapes in output sequence")
        total += o
    return total


def condition(features: np.ndarray, embedding: np.ndarray) -> np.ndarray:
    """Append the style embedding to the feature vector."""
    features = np.asarray(features, dtype=np.float64)
    embedding = np.asarray(embedding, dtype=np.float64)
    if features.ndim != 1 or embedding.ndim != 1:
        raise ValueError("condition expects rank-1 feature and embedding vectors")
    return np.concatenate([features, embedding])


def jitter_ink(ink: Ink, rng: np.random.Generator, temperature: float = 0.25,
               noise_scale: float = 0.05) -> Ink:
    """Style-jittered copy of recorded strokes.

    Each point delta is treated as the mean of a single-component mixture
    whose spread is ``noise_scale`` times the ink height, then re-sampled
    at the given temperature. Stroke structure is preserved.
    """
    ys = [pt.y for pt in ink.points()]
    height = max(ys) - min(ys)
    sigma = max(noise_scale * height, 1e-6)
    strokes = []
    for stroke in ink.strokes:
        pts = [stroke.points[0]]
        for prev, cur in zip(stroke.points, stroke.points[1:]):
            params = MDNParams(
                weights=np.array([1.0]),
                means=np.array([[cur.x - prev.x, cur.y - prev.y]]),
                stds=np.array([[sigma, sigma]]),
                corr=np.array([0.0]),
                pen_lift=0.5,
            )
            dx, dy, _ = sample_mdn(params, temperature, rng)
            last = pts[-1]
            pts.append(Point(last.x + dx, last.y + dy, cur.t))
        strokes.append(Stroke(tuple(pts)))
    return Ink(tuple(strokes))
