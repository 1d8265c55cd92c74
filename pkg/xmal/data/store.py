"""Binary embedding store.

Layout of a ``.xmal`` file: a 16-byte little-endian header (magic ``XMAL``,
version, row count, dimension) followed by ``count * dim`` float32 values in
row-major order. Row ids live in a sidecar ``<stem>.ids`` file, one per line.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from ..errors import DataError
from ..validators.artifact_validator import valid_identifier

LOGGER = logging.getLogger(__name__)

MAGIC = b"XMAL"
VERSION = 1
HEADER = struct.Struct("<4sIII")
DTYPE = np.dtype("<f4")


@dataclass
class EmbeddingStore:
    """Ordered ids paired with the rows of a float32 matrix."""

    ids: List[str]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.ids = [str(item) for item in self.ids]
        matrix = np.asarray(self.matrix, dtype=DTYPE)
        if matrix.ndim == 1:
            matrix = matrix.reshape(len(self.ids), -1) if self.ids else matrix.reshape(0, matrix.size)
        if matrix.ndim != 2:
            raise DataError(f"Store matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[0] != len(self.ids):
            raise DataError(f"Store has {len(self.ids)} ids but {matrix.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("Store ids must be unique")
        if not np.all(np.isfinite(matrix)):
            raise DataError("Store matrix contains non-finite values")
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def index(self) -> Dict[str, int]:
        return {item: row for row, item in enumerate(self.ids)}

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        """Return the rows for ``ids`` in the requested order."""

        lookup = self.index()
        missing = [item for item in ids if item not in lookup]
        if missing:
            raise DataError(f"Store is missing {len(missing)} ids, first: {missing[0]}")
        return self.matrix[[lookup[item] for item in ids]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return self.ids == other.ids and np.array_equal(self.matrix, other.matrix)


def ids_path(path: Path) -> Path:
    """Return the sidecar id file for a store path."""

    return Path(path).with_suffix(".ids")


def write_store(store: EmbeddingStore, path: Path) -> None:
    """Write ``store`` to ``path`` plus its ``.ids`` sidecar."""

    bad = [item for item in store.ids if not valid_identifier(item)]
    if bad:
        raise DataError(f"Store id {bad[0]!r} is empty or spans several lines")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count, dim = store.matrix.shape
    with path.open("wb") as handle:
        handle.write(HEADER.pack(MAGIC, VERSION, count, dim))
        handle.write(np.ascontiguousarray(store.matrix, dtype=DTYPE).tobytes())
    ids_path(path).write_text("".join(f"{item}\n" for item in store.ids), encoding="utf-8")
    LOGGER.debug("Wrote store %s (%d x %d)", path, count, dim)


def read_store(path: Path) -> EmbeddingStore:
    """Read a store written by :func:`write_store`.

    Raises:
        DataError: on missing files, bad magic bytes, or a payload whose length
            disagrees with the header.
    """

    path = Path(path)
    if not path.exists():
        raise DataError(f"Store file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, count, dim = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: wrong magic bytes {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported store version {version}")
    payload = raw[HEADER.size :]
    if len(payload) != count * dim * DTYPE.itemsize:
        raise DataError(f"{path}: payload length mismatch")
    matrix = np.frombuffer(payload, dtype=DTYPE).reshape(count, dim).copy()

    sidecar = ids_path(path)
    if not sidecar.exists():
        raise DataError(f"Store id file not found: {sidecar}")
    ids = sidecar.read_text(encoding="utf-8").splitlines()
    if len(ids) != count:
        raise DataError(f"{sidecar}: {len(ids)} ids for {count} rows")
    return EmbeddingStore(ids=ids, matrix=matrix)
