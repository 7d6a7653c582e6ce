"""Guessing probability of a passive eavesdropper on a decohering measurement."""

__version__ = "0.1.0"
