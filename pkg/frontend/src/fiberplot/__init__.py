"""Figure rendering for fiberpack sweep and study records."""

from .families import FAMILIES

__version__ = "0.1.0"
