"""Desk-scale LM training lab for entropy-guided token dropout."""

__version__ = "0.1.0"
