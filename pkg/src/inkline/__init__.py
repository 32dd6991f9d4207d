"""Toolkit for turning online handwriting into trained line recognizers:
ink processing, rendering, probabilistic image degradation, a small
differentiable-graph recognizer, LM-fused beam decoding, script/style
routing, and evaluation metrics."""

__version__ = "0.1.0"
