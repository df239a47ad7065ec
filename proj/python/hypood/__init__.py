"""Balanced hyperbolic embeddings, prototype heads and OOD scoring."""

from ._core import *  # noqa: F401,F403
from ._core import EmbedConfig, EmbeddingSet, Hierarchy, NumericError, ParseError, UsageError

__all__ = [name for name in dir() if not name.startswith("_")]
