import numpy as np
import pytest

from xmal.validators.artifact_validator import validate_collection, validate_matrix, validate_record


def _segment(**overrides: object) -> dict:
    record = {
        "segment_id": "p1_s00",
        "person_id": "p1",
        "text": "fine thanks",
        "features_path": "features/p1_s00.xmal",
        "duration_s": 2.5,
    }
    record.update(overrides)
    return record


def test_validate_record_accepts_segment() -> None:
    assert validate_record(_segment()) is True


@pytest.mark.parametrize("segment_id", ["has space", "caf\u00e9-07", "p1:s2"])
def test_validate_record_accepts_any_single_line_identifier(segment_id: str) -> None:
    assert validate_record(_segment(segment_id=segment_id)) is True


@pytest.mark.parametrize("segment_id", ["", "a\nb", "trailing\r"])
def test_validate_record_rejects_identifier_the_sidecar_cannot_hold(segment_id: str) -> None:
    assert validate_record(_segment(segment_id=segment_id)) is False


def test_validate_record_rejects_negative_duration() -> None:
    assert validate_record(_segment(duration_s=-1)) is False


def test_validate_record_rejects_non_string_text() -> None:
    assert validate_record(_segment(text=3)) is False


def test_validate_outcome_row() -> None:
    assert validate_record({"person_id": "p1", "outcome_name": "dep", "value": "1.5"}, "outcome") is True
    assert validate_record({"person_id": "p1", "outcome_name": "dep", "value": "nan"}, "outcome") is False


def test_validate_collection_handles_multiple() -> None:
    assert validate_collection([_segment(), _segment(segment_id="p1_s01")]) is True
    assert validate_collection([_segment(), {"segment_id": "x"}]) is False


def test_validate_matrix_checks_shape_and_finiteness() -> None:
    assert validate_matrix(np.zeros((2, 3)), "m", rows=2, cols=3) is True
    assert validate_matrix(np.zeros((2, 3)), "m", rows=3) is False
    assert validate_matrix(np.zeros(3), "m") is False
    assert validate_matrix(np.array([[np.inf]]), "m") is False
