"""Lightweight structural validator for manifests, outcome rows, and matrices."""

from __future__ import annotations

import logging
import math
from typing import Any, Dict, Iterable

import numpy as np

LOGGER = logging.getLogger(__name__)


def valid_identifier(value: Any) -> bool:
    """Non-empty and a single line: the only limits the ``.ids`` sidecar puts on an id."""

    text = str(value)
    return text.splitlines() == [text]


REQUIRED_FIELDS = {
    "segment": ["segment_id", "person_id", "text", "features_path", "duration_s"],
    "outcome": ["person_id", "outcome_name", "value"],
}


def validate_record(record: Dict[str, Any], kind: str = "segment") -> bool:
    """Validate a single parsed manifest line or outcome row."""

    required = REQUIRED_FIELDS.get(kind)
    if required is None:
        LOGGER.error("Unknown record kind %s", kind)
        return False

    missing = [name for name in required if name not in record]
    if missing:
        LOGGER.error("%s record missing required fields: %s", kind, ", ".join(missing))
        return False

    for id_field in ("segment_id", "person_id"):
        if id_field in record and not valid_identifier(record[id_field]):
            LOGGER.error("%s record has malformed %s %r", kind, id_field, record[id_field])
            return False

    if kind == "segment":
        if not isinstance(record["text"], str):
            LOGGER.error("Segment %s text is not a string", record["segment_id"])
            return False
        try:
            duration = float(record["duration_s"])
        except (TypeError, ValueError):
            LOGGER.error("Segment %s has non-numeric duration_s", record["segment_id"])
            return False
        if not math.isfinite(duration) or duration < 0:
            LOGGER.error("Segment %s has invalid duration_s %s", record["segment_id"], duration)
            return False

    if kind == "outcome":
        try:
            value = float(record["value"])
        except (TypeError, ValueError):
            LOGGER.error("Outcome row for %s has non-numeric value", record["person_id"])
            return False
        if not math.isfinite(value):
            LOGGER.error("Outcome row for %s has non-finite value", record["person_id"])
            return False

    return True


def validate_collection(records: Iterable[Dict[str, Any]], kind: str = "segment") -> bool:
    """Validate multiple records, returning True only if all pass."""

    valid = True
    for record in records:
        valid = validate_record(record, kind) and valid
    return valid


def validate_matrix(matrix: np.ndarray, name: str, rows: int | None = None, cols: int | None = None) -> bool:
    """Check that ``matrix`` is 2-D, finite, and optionally of a given shape."""

    if matrix.ndim != 2:
        LOGGER.error("%s must be 2-D, got shape %s", name, matrix.shape)
        return False
    if rows is not None and matrix.shape[0] != rows:
        LOGGER.error("%s has %d rows, expected %d", name, matrix.shape[0], rows)
        return False
    if cols is not None and matrix.shape[1] != cols:
        LOGGER.error("%s has %d columns, expected %d", name, matrix.shape[1], cols)
        return False
    if not np.all(np.isfinite(matrix)):
        LOGGER.error("%s contains non-finite values", name)
        return False
    return True
