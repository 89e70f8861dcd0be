"""Impulse responses to persistent, externally identified shocks."""

from __future__ import annotations

__version__ = "0.1.0"
