"""Alignment target construction.

Three modes are supported: the plain teacher embedding (semantic), the teacher
embedding with a block of coordinates overwritten by scaled psych scores
(replacement), and the teacher embedding with the psych scores appended
(projection). Targets are never renormalized; both losses are cosine based.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from .psych import PSYCH_DIMENSIONS

LOGGER = logging.getLogger(__name__)

N_PSYCH = len(PSYCH_DIMENSIONS)


class TargetKind(str, enum.Enum):
    SEMANTIC = "semantic"
    REPLACEMENT = "replacement"
    PROJECTION = "projection"


@dataclass(frozen=True)
class TargetMode:
    kind: TargetKind = TargetKind.SEMANTIC
    replace_count: int = N_PSYCH
    replace_offset: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.replace_count < 1 or self.replace_offset < 0:
            raise ConfigError("replace_count must be positive and replace_offset nonnegative")
        if self.replace_count > N_PSYCH:
            raise ConfigError(f"replace_count cannot exceed {N_PSYCH}")

    def check_teacher_dim(self, dim: int) -> None:
        if self.kind is TargetKind.REPLACEMENT and self.replace_count + self.replace_offset > dim:
            raise DataError(
                f"Replacement of {self.replace_count} dims at offset {self.replace_offset} "
                f"does not fit teacher dim {dim}"
            )

    def target_dim(self, teacher_dim: int) -> int:
        return teacher_dim + N_PSYCH if self.kind is TargetKind.PROJECTION else teacher_dim


@dataclass
class TargetVector:
    values: np.ndarray
    mode: TargetMode


def _finite_vector(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise DataError(f"{name} must be a vector, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{name} contains non-finite values")
    return values


def build_semantic_target(teacher_emb: np.ndarray, expected_dim: Optional[int] = None) -> TargetVector:
    teacher = _finite_vector(teacher_emb, "teacher embedding")
    if expected_dim is not None and teacher.shape[0] != expected_dim:
        raise DataError(f"Teacher embedding has dim {teacher.shape[0]}, expected {expected_dim}")
    return TargetVector(values=teacher.copy(), mode=TargetMode(TargetKind.SEMANTIC))


def build_replacement_target(
    teacher_emb: np.ndarray, psych_scaled: np.ndarray, mode: Optional[TargetMode] = None
) -> TargetVector:
    """Overwrite ``replace_count`` teacher coordinates starting at ``replace_offset``.

    The leading ``replace_count`` entries of ``psych_scaled`` are installed; every
    other teacher coordinate is copied unchanged.
    """

    mode = mode or TargetMode(TargetKind.REPLACEMENT)
    teacher = _finite_vector(teacher_emb, "teacher embedding")
    psych = _finite_vector(psych_scaled, "scaled psych vector")
    if psych.shape[0] < mode.replace_count:
        raise DataError(f"Need {mode.replace_count} psych values, got {psych.shape[0]}")
    mode.check_teacher_dim(teacher.shape[0])

    values = teacher.copy()
    start = mode.replace_offset
    values[start : start + mode.replace_count] = psych[: mode.replace_count]
    return TargetVector(values=values, mode=mode)


def build_projection_target(teacher_emb: np.ndarray, psych_scaled: np.ndarray) -> TargetVector:
    teacher = _finite_vector(teacher_emb, "teacher embedding")
    psych = _finite_vector(psych_scaled, "scaled psych vector")
    if psych.shape[0] != N_PSYCH:
        raise DataError(f"Projection targets need exactly {N_PSYCH} psych values, got {psych.shape[0]}")
    return TargetVector(values=np.concatenate([teacher, psych]), mode=TargetMode(TargetKind.PROJECTION))


def build_targets(
    teacher_matrix: np.ndarray, psych_scaled_matrix: Optional[np.ndarray], mode: TargetMode
) -> np.ndarray:
    """Build one target row per teacher row for ``mode``."""

    teacher_matrix = np.asarray(teacher_matrix, dtype=np.float64)
    if mode.kind is TargetKind.SEMANTIC:
        rows = [build_semantic_target(row, teacher_matrix.shape[1]).values for row in teacher_matrix]
    else:
        if psych_scaled_matrix is None or len(psych_scaled_matrix) != len(teacher_matrix):
            raise DataError(f"{mode.kind.value} targets need one scaled psych row per teacher row")
        if mode.kind is TargetKind.REPLACEMENT:
            rows = [build_replacement_target(t, p, mode).values for t, p in zip(teacher_matrix, psych_scaled_matrix)]
        else:
            rows = [build_projection_target(t, p).values for t, p in zip(teacher_matrix, psych_scaled_matrix)]

    if not rows:
        return np.zeros((0, mode.target_dim(teacher_matrix.shape[1] if teacher_matrix.ndim == 2 else 0)))
    LOGGER.debug("Built %d %s targets", len(rows), mode.kind.value)
    return np.vstack(rows)
