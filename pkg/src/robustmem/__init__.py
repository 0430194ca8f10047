"""Explicit ReLU networks that robustly memorize labeled point sets."""
__version__ = "0.1.0"
