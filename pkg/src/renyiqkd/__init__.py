"""Certified finite-size QKD key rates from Renyi-entropy optimization."""

__version__ = "0.1.0"
