"""Miniature differentiable-graph engine and the recognizer topologies."""
