import json
from pathlib import Path

import numpy as np
import pytest

from xmal.data.records import (
    DatasetSplit,
    PersonRecord,
    SegmentRecord,
    load_all_features,
    load_features,
    load_manifest,
    load_outcomes,
    split_dataset,
    write_manifest,
    write_outcomes,
)
from xmal.data.store import EmbeddingStore, write_store
from xmal.errors import DataError


def _line(segment_id: str, person_id: str = "p1") -> str:
    return json.dumps(
        {
            "segment_id": segment_id,
            "person_id": person_id,
            "text": "hello there",
            "features_path": f"features/{segment_id}.xmal",
            "duration_s": 1.5,
        }
    )


def test_load_manifest_keeps_file_order(tmp_path: Path) -> None:
    path = tmp_path / "manifest.jsonl"
    path.write_text(_line("s2") + "\n" + _line("s1") + "\n", encoding="utf-8")

    records = load_manifest(path)
    assert [record.segment_id for record in records] == ["s2", "s1"]
    assert records[0].duration_s == 1.5


def test_empty_manifest_gives_empty_list(tmp_path: Path) -> None:
    path = tmp_path / "manifest.jsonl"
    path.write_text("", encoding="utf-8")
    assert load_manifest(path) == []


def test_duplicate_segment_id_names_line(tmp_path: Path) -> None:
    path = tmp_path / "manifest.jsonl"
    path.write_text("\n".join([_line("s1"), _line("s2"), _line("s1")]) + "\n", encoding="utf-8")

    with pytest.raises(DataError, match=r":3: duplicate segment_id 's1' \(first on line 1\)"):
        load_manifest(path)


def test_malformed_line_reports_line_number(tmp_path: Path) -> None:
    path = tmp_path / "manifest.jsonl"
    path.write_text(_line("s1") + "\n{not json\n", encoding="utf-8")

    with pytest.raises(DataError, match=":2: malformed manifest line"):
        load_manifest(path)


def test_missing_field_is_malformed(tmp_path: Path) -> None:
    path = tmp_path / "manifest.jsonl"
    path.write_text(json.dumps({"segment_id": "s1", "person_id": "p1"}) + "\n", encoding="utf-8")

    with pytest.raises(DataError, match=":1: malformed"):
        load_manifest(path)


def test_missing_manifest(tmp_path: Path) -> None:
    with pytest.raises(DataError, match="not found"):
        load_manifest(tmp_path / "absent.jsonl")


def test_write_manifest_is_readable(tmp_path: Path) -> None:
    records = [SegmentRecord("s1", "p1", "héllo", "f/s1.xmal", 0.5), SegmentRecord("s2", "p2", "", "f/s2.xmal", 0.0)]
    path = tmp_path / "out" / "manifest.jsonl"
    write_manifest(records, path)

    assert load_manifest(path) == records
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert list(first) == ["segment_id", "person_id", "text", "features_path", "duration_s"]


def test_load_features_relative_to_root(tmp_path: Path) -> None:
    write_store(EmbeddingStore(["0", "1"], np.ones((2, 3))), tmp_path / "features" / "s1.xmal")
    write_store(EmbeddingStore(["0"], np.zeros((1, 3))), tmp_path / "features" / "s2.xmal")
    records = [
        SegmentRecord("s1", "p1", "", "features/s1.xmal", 1.0),
        SegmentRecord("s2", "p1", "", "features/s2.xmal", 1.0),
    ]

    features = load_all_features(records, tmp_path)
    assert [matrix.shape for matrix in features] == [(2, 3), (1, 3)]
    assert records[0].acoustic_features is features[0]


def test_features_need_a_frame(tmp_path: Path) -> None:
    write_store(EmbeddingStore([], np.zeros((0, 3))), tmp_path / "s1.xmal")
    with pytest.raises(DataError, match="no feature frames"):
        load_features(SegmentRecord("s1", "p1", "", "s1.xmal", 1.0), tmp_path)


def test_inconsistent_feature_dims_rejected(tmp_path: Path) -> None:
    write_store(EmbeddingStore(["0"], np.ones((1, 3))), tmp_path / "a.xmal")
    write_store(EmbeddingStore(["0"], np.ones((1, 4))), tmp_path / "b.xmal")
    records = [SegmentRecord("a", "p", "", "a.xmal", 1.0), SegmentRecord("b", "p", "", "b.xmal", 1.0)]

    with pytest.raises(DataError, match="Inconsistent feature dimensions"):
        load_all_features(records, tmp_path)


def test_outcomes_write_and_load(tmp_path: Path) -> None:
    path = tmp_path / "outcomes.csv"
    write_outcomes([PersonRecord("p1", {"dep": 0.25, "anx": -1.0}), PersonRecord("p2", {"dep": 3.0})], path)

    persons = load_outcomes(path)
    assert persons["p1"].outcome_scores == {"dep": 0.25, "anx": -1.0}
    assert persons["p2"].outcome_scores == {"dep": 3.0}
    assert path.read_text(encoding="utf-8").splitlines()[0] == "person_id,outcome_name,value"


def test_duplicate_outcome_rejected(tmp_path: Path) -> None:
    path = tmp_path / "outcomes.csv"
    path.write_text("p1,dep,1.0\np1,dep,2.0\n", encoding="utf-8")
    with pytest.raises(DataError, match=":2: duplicate outcome"):
        load_outcomes(path)


def test_non_numeric_outcome_rejected(tmp_path: Path) -> None:
    path = tmp_path / "outcomes.csv"
    path.write_text("p1,dep,high\n", encoding="utf-8")
    with pytest.raises(DataError, match="malformed outcome row"):
        load_outcomes(path)


def test_split_sizes_follow_ratios() -> None:
    ids = [f"s{index}" for index in range(10)]
    split = split_dataset(ids, (0.8, 0.1, 0.1), seed=7)

    assert (len(split.train), len(split.val), len(split.test)) == (8, 1, 1)
    assert sorted(split.train + split.val + split.test) == sorted(ids)


def test_split_remainder_goes_to_train() -> None:
    split = split_dataset([f"s{index}" for index in range(7)], (0.5, 0.25, 0.25), seed=0)
    assert (len(split.train), len(split.val), len(split.test)) == (5, 1, 1)


def test_split_degenerate_ratios() -> None:
    split = split_dataset(["a", "b", "c"], (1.0, 0.0, 0.0), seed=3)
    assert sorted(split.train) == ["a", "b", "c"]
    assert split.val == [] and split.test == []


def test_split_is_deterministic() -> None:
    ids = [f"s{index}" for index in range(50)]
    assert split_dataset(ids, (0.8, 0.1, 0.1), 11) == split_dataset(ids, (0.8, 0.1, 0.1), 11)


def test_split_rejects_bad_input() -> None:
    with pytest.raises(DataError, match="sum to 1"):
        split_dataset(["a"], (0.5, 0.1, 0.1), 0)
    with pytest.raises(DataError, match="empty"):
        split_dataset([], (0.8, 0.1, 0.1), 0)


def test_split_json() -> None:
    split = DatasetSplit(train=["a"], val=["b"], test=[])
    assert DatasetSplit.from_json(json.loads(json.dumps(split.to_json()))) == split
    with pytest.raises(DataError, match="bucket"):
        DatasetSplit.from_json({"train": []})
