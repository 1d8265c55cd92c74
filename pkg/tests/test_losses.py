import math
from typing import List

import numpy as np
import pytest

from xmal.errors import ConfigError, DataError, NumericalError
from xmal.training.losses import (
    LossConfig,
    LossKind,
    cosine_similarity,
    cs_loss,
    finite_difference_check,
    nce_loss,
    paired_cosine,
    pairwise_similarity,
)


def _scalar_cos(a: List[float], b: List[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def _scalar_cs(students: np.ndarray, targets: np.ndarray) -> float:
    return sum(1.0 - _scalar_cos(list(a), list(t)) for a, t in zip(students, targets))


def _scalar_nce(students: np.ndarray, targets: np.ndarray, tau: float) -> float:
    total = 0.0
    for i, a in enumerate(students):
        logits = [_scalar_cos(list(a), list(t)) / tau for t in targets]
        peak = max(logits)
        log_partition = peak + math.log(sum(math.exp(value - peak) for value in logits))
        total += log_partition - logits[i]
    return total


def test_cosine_similarity_anchors() -> None:
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == -1.0


def test_cosine_similarity_zero_norm() -> None:
    with pytest.raises(NumericalError):
        cosine_similarity(np.zeros(2), np.ones(2))


def test_pairwise_similarity_shapes() -> None:
    np.testing.assert_allclose(pairwise_similarity(np.eye(2), np.eye(2)), np.eye(2))
    assert pairwise_similarity(np.array([[3.0, 4.0]]), np.array([[3.0, 4.0]])).shape == (1, 1)
    np.testing.assert_allclose(pairwise_similarity(np.ones((3, 2)), np.ones((3, 2))), np.ones((3, 3)))


def test_zero_norm_row_reports_index() -> None:
    students = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(NumericalError, match="row 1"):
        pairwise_similarity(students, np.ones((2, 2)))


def test_cs_anchor_values() -> None:
    assert cs_loss(np.eye(3), np.eye(3)).value == pytest.approx(0.0, abs=1e-12)
    students = np.array([[1.0, 0.0], [0.0, 1.0]])
    targets = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert cs_loss(students, targets).value == pytest.approx(2.0, abs=1e-12)


def test_nce_singleton_is_zero() -> None:
    assert nce_loss(np.array([[0.3, -2.0]]), np.array([[1.0, 1.0]]), 0.1).value == pytest.approx(0.0, abs=1e-12)


def test_nce_uniform_batch_gives_log_n() -> None:
    batch = np.tile(np.array([[0.5, 1.0, -2.0]]), (4, 1))
    result = nce_loss(batch, batch, 0.1)
    np.testing.assert_allclose(result.terms, math.log(4), atol=1e-9)


def test_nce_orthogonal_pair_term() -> None:
    students = np.array([[1.0, 0.0], [0.0, 1.0]])
    targets = np.array([[1.0, 0.0], [0.0, 1.0]])
    result = nce_loss(students, targets, 0.1)
    assert result.terms[0] == pytest.approx(math.log1p(math.exp(-10.0)), abs=1e-9)


def test_losses_match_scalar_reimplementation() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(200):
        count = int(rng.integers(1, 17))
        dim = int(rng.integers(1, 9))
        students = rng.normal(size=(count, dim))
        targets = rng.normal(size=(count, dim))
        tau = float(rng.uniform(0.05, 2.0))

        assert cs_loss(students, targets).value == pytest.approx(_scalar_cs(students, targets), abs=1e-9)
        assert nce_loss(students, targets, tau).value == pytest.approx(_scalar_nce(students, targets, tau), abs=1e-9)


def test_gradients_match_finite_differences() -> None:
    rng = np.random.default_rng(7)
    for _ in range(40):
        count = int(rng.integers(1, 17))
        dim = int(rng.integers(1, 9))
        students = rng.normal(size=(count, dim))
        targets = rng.normal(size=(count, dim))

        assert finite_difference_check(cs_loss, students, targets, eps=1e-6) < 1e-4
        nce = LossConfig(LossKind.NCE, temperature=0.1).evaluate
        assert finite_difference_check(nce, students, targets, eps=1e-6) < 1e-4


def test_exclusive_denominator_gradient() -> None:
    rng = np.random.default_rng(3)
    students = rng.normal(size=(5, 4))
    targets = rng.normal(size=(5, 4))
    loss = LossConfig(LossKind.NCE, temperature=0.2, exclude_positive=True)

    assert finite_difference_check(loss.evaluate, students, targets) < 1e-4
    inclusive = nce_loss(students, targets, 0.2).value
    assert loss.evaluate(students, targets).value < inclusive


def test_exclusive_denominator_needs_two_rows() -> None:
    with pytest.raises(DataError):
        nce_loss(np.ones((1, 2)), np.ones((1, 2)), 0.1, exclude_positive=True)


def test_losses_are_scale_invariant_per_row() -> None:
    rng = np.random.default_rng(5)
    students = rng.normal(size=(6, 5))
    targets = rng.normal(size=(6, 5))
    scaled = students.copy()
    scaled[2] *= 37.0
    targets_scaled = targets.copy()
    targets_scaled[4] *= 0.01

    assert cs_loss(scaled, targets_scaled).value == pytest.approx(cs_loss(students, targets).value, abs=1e-9)
    assert nce_loss(scaled, targets_scaled, 0.1).value == pytest.approx(
        nce_loss(students, targets, 0.1).value, abs=1e-9
    )


def test_loss_bounds() -> None:
    rng = np.random.default_rng(9)
    students = rng.normal(size=(8, 3))
    targets = rng.normal(size=(8, 3))
    tau = 0.1

    value = cs_loss(students, targets).value
    assert 0.0 <= value <= 16.0
    terms = nce_loss(students, targets, tau).terms
    assert np.all(terms > 0)
    assert np.all(terms < math.log(8) + 2.0 / tau)


def test_large_temperature_approaches_log_n() -> None:
    rng = np.random.default_rng(11)
    students = rng.normal(size=(5, 4))
    targets = rng.normal(size=(5, 4))
    np.testing.assert_allclose(nce_loss(students, targets, 1e6).terms, math.log(5), atol=1e-5)


def test_temperature_must_be_positive() -> None:
    with pytest.raises(ConfigError):
        LossConfig(LossKind.NCE, temperature=0.0)
    with pytest.raises(ConfigError):
        nce_loss(np.ones((2, 2)), np.ones((2, 2)), -1.0)


def test_finite_difference_step_range() -> None:
    with pytest.raises(ConfigError):
        finite_difference_check(cs_loss, np.ones((1, 2)), np.ones((1, 2)), eps=1e-2)


def test_shape_mismatch() -> None:
    with pytest.raises(DataError, match="shapes differ"):
        cs_loss(np.ones((2, 3)), np.ones((3, 3)))


def test_paired_cosine_rows() -> None:
    np.testing.assert_allclose(paired_cosine(np.eye(2), np.array([[2.0, 0.0], [1.0, 0.0]])), [1.0, 0.0])


def test_loss_config_dispatch() -> None:
    students = np.eye(3)
    assert LossConfig("cs").evaluate(students, students).value == pytest.approx(0.0, abs=1e-12)
    assert LossConfig("nce", temperature=0.5).evaluate(students, students).terms.shape == (3,)
