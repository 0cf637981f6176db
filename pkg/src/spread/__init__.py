"""Projected spread models on trees: patterns, deterministic and random spread, rates."""
__version__ = "0.1.0"
