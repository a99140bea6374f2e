"""Dialect identification from mined intonation patterns."""

__version__ = "0.1.0"
