"""Correlation, paired testing, and false-discovery helpers."""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import stats as scipy_stats

from ..errors import DataError

LOGGER = logging.getLogger(__name__)


class Correlation(NamedTuple):
    r: float
    degenerate: bool = False


class TTest(NamedTuple):
    t: float
    p: float
    degenerate: bool = False


def pearson(x: np.ndarray, y: np.ndarray) -> Correlation:
    """Product-moment correlation; a constant input gives ``r = 0`` flagged degenerate."""

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least two observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return Correlation(0.0, degenerate=True)

    x_centered = x - x.mean()
    y_centered = y - y.mean()
    denominator = math.sqrt(float(x_centered @ x_centered) * float(y_centered @ y_centered))
    return Correlation(float(np.clip(x_centered @ y_centered / denominator, -1.0, 1.0)))


def correlation_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of a Pearson ``r`` from ``n`` observations (``n - 2`` df)."""

    if n < 3:
        return 1.0
    if abs(r) >= 1.0:
        return 0.0
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * scipy_stats.t.sf(abs(t_stat), n - 2))


def paired_ttest(errors_a: np.ndarray, errors_b: np.ndarray) -> TTest:
    """Paired two-sided t-test on ``errors_a - errors_b`` with ``N - 1`` df."""

    errors_a = np.asarray(errors_a, dtype=np.float64)
    errors_b = np.asarray(errors_b, dtype=np.float64)
    if errors_a.shape != errors_b.shape or errors_a.ndim != 1:
        raise DataError("paired_ttest needs two equal-length vectors")
    if errors_a.size < 2:
        raise DataError("paired_ttest needs at least two pairs")

    differences = errors_a - errors_b
    if np.ptp(differences) == 0:
        return TTest(0.0, 1.0, degenerate=True)
    result = scipy_stats.ttest_rel(errors_a, errors_b)
    return TTest(float(result.statistic), float(result.pvalue))


def bh_adjust(p_values: np.ndarray) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""

    p_values = np.asarray(p_values, dtype=np.float64)
    if p_values.size == 0:
        return p_values.copy()
    if np.any((p_values < 0) | (p_values > 1)):
        raise DataError("p-values must lie in [0, 1]")
    return scipy_stats.false_discovery_control(p_values, method="bh")
