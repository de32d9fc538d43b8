"""Symbolic engine for Cartan's equivalence method on explicit G-structures."""

from . import symcore, exterior, frame, gstructure, reduction, cli  # noqa: F401

__all__ = ["symcore", "exterior", "frame", "gstructure", "reduction", "cli"]
