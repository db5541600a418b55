"""Pixel-antenna rate-splitting downlink: models, optimizers and experiment harness."""

__version__ = "0.1.0"
