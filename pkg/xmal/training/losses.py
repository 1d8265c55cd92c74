"""Cosine-similarity and noise-contrastive alignment objectives.

Both losses are summed over the batch and return analytic gradients with
respect to the student embeddings ``A``; targets ``T`` are constants.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..errors import ConfigError, DataError, NumericalError

LOGGER = logging.getLogger(__name__)


class LossKind(str, enum.Enum):
    CS = "cs"
    NCE = "nce"


@dataclass
class LossResult:
    value: float
    grad_wrt_students: np.ndarray
    terms: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LossConfig:
    kind: LossKind = LossKind.NCE
    temperature: float = 0.1
    exclude_positive: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LossKind(self.kind))
        if not self.temperature > 0:
            raise ConfigError(f"Temperature must be positive, got {self.temperature}")

    def evaluate(self, students: np.ndarray, targets: np.ndarray) -> LossResult:
        if self.kind is LossKind.CS:
            return cs_loss(students, targets)
        return nce_loss(students, targets, self.temperature, exclude_positive=self.exclude_positive)


def _normalize_rows(matrix: np.ndarray, name: str) -> Tuple[np.ndarray, np.ndarray]:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {matrix.shape}")
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise NumericalError(f"{name} row {int(zero[0])} has zero norm")
    return matrix / norms[:, None], norms


def _check_pair(students: np.ndarray, targets: np.ndarray) -> None:
    if np.shape(students) != np.shape(targets):
        raise DataError(f"Student and target shapes differ: {np.shape(students)} vs {np.shape(targets)}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise NumericalError("Cosine similarity of a zero-norm vector is undefined")
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))


def pairwise_similarity(students: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Entry ``(i, j)`` is the cosine similarity of student ``i`` and target ``j``."""

    student_unit, _ = _normalize_rows(students, "student")
    target_unit, _ = _normalize_rows(targets, "target")
    return student_unit @ target_unit.T


def _chain_through_norm(grad_unit: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # d(a/|a|)/da projects out the radial component and divides by |a|
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms[:, None]


def paired_cosine(students: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity of matching student and target rows."""

    _check_pair(students, targets)
    student_unit, _ = _normalize_rows(students, "student")
    target_unit, _ = _normalize_rows(targets, "target")
    return np.sum(student_unit * target_unit, axis=1)


def cs_loss(students: np.ndarray, targets: np.ndarray) -> LossResult:
    """Sum over the batch of ``1 - sim(A_i, T_i)``."""

    _check_pair(students, targets)
    student_unit, norms = _normalize_rows(students, "student")
    target_unit, _ = _normalize_rows(targets, "target")

    similarity = np.sum(student_unit * target_unit, axis=1)
    terms = 1.0 - similarity
    grad = _chain_through_norm(-target_unit, student_unit, norms)
    return LossResult(value=float(terms.sum()), grad_wrt_students=grad, terms=terms)


def nce_loss(
    students: np.ndarray, targets: np.ndarray, temperature: float, exclude_positive: bool = False
) -> LossResult:
    """InfoNCE over the batch with in-batch negatives.

    By default the positive appears in the softmax denominator. With
    ``exclude_positive`` the denominator runs over the other targets only, which
    needs at least two rows and is unbounded below.
    """

    if not temperature > 0:
        raise ConfigError(f"Temperature must be positive, got {temperature}")
    _check_pair(students, targets)
    student_unit, norms = _normalize_rows(students, "student")
    target_unit, _ = _normalize_rows(targets, "target")
    count = student_unit.shape[0]
    if count < 1:
        raise DataError("NCE loss needs at least one pair")
    if exclude_positive and count < 2:
        raise DataError("NCE loss without the positive in the denominator needs at least two pairs")

    logits = student_unit @ target_unit.T / temperature
    positives = np.diag(logits).copy()
    if exclude_positive:
        np.fill_diagonal(logits, -np.inf)

    row_max = logits.max(axis=1, keepdims=True)
    shifted = np.exp(logits - row_max)
    partition = shifted.sum(axis=1)
    terms = (row_max[:, 0] - positives) + np.log(partition)

    softmax = shifted / partition[:, None]
    grad_logits = (softmax - np.eye(count)) / temperature
    grad = _chain_through_norm(grad_logits @ target_unit, student_unit, norms)
    return LossResult(value=float(terms.sum()), grad_wrt_students=grad, terms=terms)


def finite_difference_check(
    loss_fn: Callable[[np.ndarray, np.ndarray], LossResult],
    students: np.ndarray,
    targets: np.ndarray,
    eps: float = 1e-6,
) -> float:
    """Largest gap between the analytic and central-difference gradients.

    Each coordinate's error is ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """

    if not 0 < eps <= 1e-3:
        raise ConfigError(f"Finite-difference step must lie in (0, 1e-3], got {eps}")
    students = np.array(students, dtype=np.float64)
    analytic = loss_fn(students, targets).grad_wrt_students

    worst = 0.0
    for index in np.ndindex(students.shape):
        original = students[index]
        students[index] = original + eps
        upper = loss_fn(students, targets).value
        students[index] = original - eps
        lower = loss_fn(students, targets).value
        students[index] = original
        numeric = (upper - lower) / (2 * eps)
        scale = max(1.0, abs(analytic[index]), abs(numeric))
        worst = max(worst, abs(analytic[index] - numeric) / scale)
    return worst
