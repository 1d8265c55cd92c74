"""Frozen text teachers.

Any object with an ``embed(segment_ids, texts)`` method can serve as the
teacher. The in-repo implementation serves embeddings that were computed ahead
of time (the synthetic generator writes them) from an embedding store.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ..data.store import EmbeddingStore, read_store

LOGGER = logging.getLogger(__name__)


class TextTeacher(Protocol):
    dim: int

    def embed(self, segment_ids: Sequence[str], texts: Sequence[str]) -> np.ndarray: ...


class PrecomputedTeacher:
    """Teacher backed by an :class:`EmbeddingStore` keyed by segment id."""

    def __init__(self, store: EmbeddingStore) -> None:
        self.store = store

    @classmethod
    def from_path(cls, path: Path) -> "PrecomputedTeacher":
        return cls(read_store(path))

    @property
    def dim(self) -> int:
        return self.store.dim

    def embed(self, segment_ids: Sequence[str], texts: Sequence[str]) -> np.ndarray:
        LOGGER.debug("Serving %d precomputed teacher embeddings", len(segment_ids))
        return self.store.rows(segment_ids).astype(np.float64)
