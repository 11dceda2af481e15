"""Discrete symbol calculus on the periodic square."""

from __future__ import annotations

__version__ = "0.1.0"
