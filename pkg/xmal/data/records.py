"""Record types, manifest and outcome ingestion, and dataset splitting."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError
from ..validators.artifact_validator import REQUIRED_FIELDS, validate_record
from .store import read_store

LOGGER = logging.getLogger(__name__)

MANIFEST_FIELDS = REQUIRED_FIELDS["segment"]


@dataclass
class SegmentRecord:
    """One paired audio/text segment.

    ``acoustic_features`` is loaded lazily from ``features_path`` (relative to the
    manifest directory) and ``teacher_embedding`` is filled by a text teacher.
    """

    segment_id: str
    person_id: str
    text: str
    features_path: str
    duration_s: float
    acoustic_features: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    teacher_embedding: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_json(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in MANIFEST_FIELDS}


@dataclass
class PersonRecord:
    person_id: str
    outcome_scores: Dict[str, float] = field(default_factory=dict)


@dataclass
class DatasetSplit:
    train: List[str]
    val: List[str]
    test: List[str]

    def to_json(self) -> Dict[str, List[str]]:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_json(cls, payload: Dict[str, List[str]]) -> "DatasetSplit":
        try:
            return cls(train=list(payload["train"]), val=list(payload["val"]), test=list(payload["test"]))
        except KeyError as exc:
            raise DataError(f"Split file missing bucket {exc}") from exc


def load_manifest(path: Path) -> List[SegmentRecord]:
    """Parse a JSON-lines manifest into records, preserving file order.

    Raises:
        DataError: for a missing file, a malformed line (with its 1-based line
            number), or a repeated ``segment_id``.
    """

    path = Path(path)
    if not path.exists():
        raise DataError(f"Manifest not found: {path}")

    records: List[SegmentRecord] = []
    seen: Dict[str, int] = {}
    with path.open(encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_number}: malformed manifest line ({exc.msg})") from exc
            if not isinstance(payload, dict) or not validate_record(payload, "segment"):
                raise DataError(f"{path}:{line_number}: malformed manifest line")
            segment_id = str(payload["segment_id"])
            if segment_id in seen:
                raise DataError(
                    f"{path}:{line_number}: duplicate segment_id {segment_id!r} (first on line {seen[segment_id]})"
                )
            seen[segment_id] = line_number
            records.append(
                SegmentRecord(
                    segment_id=segment_id,
                    person_id=str(payload["person_id"]),
                    text=payload["text"],
                    features_path=str(payload["features_path"]),
                    duration_s=float(payload["duration_s"]),
                )
            )

    LOGGER.info("Loaded %d segments from %s", len(records), path)
    return records


def write_manifest(records: Iterable[SegmentRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    LOGGER.info("Saved manifest to %s", path)


def load_features(record: SegmentRecord, root: Path) -> np.ndarray:
    """Load and cache the acoustic feature matrix for ``record``."""

    if record.acoustic_features is None:
        store = read_store(Path(root) / record.features_path)
        if len(store) < 1:
            raise DataError(f"Segment {record.segment_id} has no feature frames")
        record.acoustic_features = store.matrix.astype(np.float64)
    return record.acoustic_features


def load_all_features(records: Sequence[SegmentRecord], root: Path) -> List[np.ndarray]:
    """Load every record's features and check the feature dimension is constant."""

    features = [load_features(record, root) for record in records]
    dims = {matrix.shape[1] for matrix in features}
    if len(dims) > 1:
        raise DataError(f"Inconsistent feature dimensions across dataset: {sorted(dims)}")
    return features


def load_outcomes(path: Path) -> Dict[str, PersonRecord]:
    """Read ``person_id,outcome_name,value`` rows keyed by person."""

    path = Path(path)
    if not path.exists():
        raise DataError(f"Outcome table not found: {path}")

    persons: Dict[str, PersonRecord] = {}
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        for line_number, row in enumerate(reader, start=1):
            if not row or (line_number == 1 and row[:3] == REQUIRED_FIELDS["outcome"]):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{line_number}: expected 3 columns, got {len(row)}")
            payload = dict(zip(REQUIRED_FIELDS["outcome"], row))
            if not validate_record(payload, "outcome"):
                raise DataError(f"{path}:{line_number}: malformed outcome row")
            person = persons.setdefault(payload["person_id"], PersonRecord(payload["person_id"]))
            if payload["outcome_name"] in person.outcome_scores:
                raise DataError(
                    f"{path}:{line_number}: duplicate outcome {payload['outcome_name']!r} for {person.person_id}"
                )
            person.outcome_scores[payload["outcome_name"]] = float(payload["value"])

    LOGGER.info("Loaded outcomes for %d persons from %s", len(persons), path)
    return persons


def write_outcomes(persons: Iterable[PersonRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(REQUIRED_FIELDS["outcome"])
        for person in persons:
            for name, value in person.outcome_scores.items():
                writer.writerow([person.person_id, name, repr(float(value))])
    LOGGER.info("Saved outcomes to %s", path)


def outcome_names(persons: Dict[str, PersonRecord]) -> List[str]:
    names = {name for person in persons.values() for name in person.outcome_scores}
    return sorted(names)


def split_dataset(ids: Sequence[str], ratios: Tuple[float, float, float], seed: int) -> DatasetSplit:
    """Shuffle ``ids`` with ``seed`` and cut them into train/val/test buckets.

    Val and test receive ``floor(n * ratio)`` records; the remainder goes to train.
    """

    if not ids:
        raise DataError("Cannot split an empty id list")
    if len(ratios) != 3 or any(ratio < 0 for ratio in ratios):
        raise DataError(f"Split ratios must be three nonnegative values, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"Split ratios must sum to 1, got {sum(ratios)}")

    total = len(ids)
    n_val = math.floor(total * ratios[1] + 1e-9)
    n_test = math.floor(total * ratios[2] + 1e-9)
    n_train = total - n_val - n_test

    order = np.random.default_rng(seed).permutation(total)
    shuffled = [ids[index] for index in order]
    split = DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )
    LOGGER.debug("Split %d ids into %d/%d/%d", total, n_train, n_val, n_test)
    return split
