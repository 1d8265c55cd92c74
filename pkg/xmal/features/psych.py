"""Lexicon-based psychological dimensions and their rescaling.

Scores follow the usual lexicon estimate: an intercept plus the weighted sum of
relative token frequencies. Before they are mixed into teacher targets, the
scores are z-scored per dimension and mapped onto the pooled mean/std of the
teacher embedding values.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np

from ..errors import DataError, NumericalError

LOGGER = logging.getLogger(__name__)

PSYCH_DIMENSIONS = ["VAL", "ARO", "OPE", "CON", "EXT", "AGR", "NEU", "ANG", "ANX", "DEP"]
INTERCEPT_TOKEN = "_intercept"
TOKEN_PATTERN = re.compile(r"[^\W_]+")
MIN_STD = 1e-12


def tokenize(text: str) -> List[str]:
    """Lowercase word tokenization; whitespace and punctuation separate tokens."""

    return TOKEN_PATTERN.findall(text.lower())


@dataclass
class PsychDims:
    """Ten psychological scores in canonical ``PSYCH_DIMENSIONS`` order."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(PSYCH_DIMENSIONS),):
            raise DataError(f"PsychDims needs {len(PSYCH_DIMENSIONS)} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NumericalError("PsychDims values must be finite")
        self.values = values

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(PSYCH_DIMENSIONS, self.values.tolist()))

    def __getitem__(self, dimension: str) -> float:
        return float(self.values[PSYCH_DIMENSIONS.index(dimension)])


@dataclass
class Lexicon:
    weights: Dict[str, Dict[str, float]] = field(default_factory=dict)
    intercepts: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        unknown = (set(self.weights) | set(self.intercepts)) - set(PSYCH_DIMENSIONS)
        if unknown:
            raise DataError(f"Lexicon has unknown dimensions: {', '.join(sorted(unknown))}")
        if not any(self.weights.get(dimension) for dimension in PSYCH_DIMENSIONS):
            raise DataError("Lexicon must contain at least one weighted token")
        values = [w for table in self.weights.values() for w in table.values()] + list(self.intercepts.values())
        if not np.all(np.isfinite(values)):
            raise DataError("Lexicon weights must be finite")
        self.weights = {dim: {tok.lower(): float(w) for tok, w in table.items()} for dim, table in self.weights.items()}

    def intercept_vector(self) -> np.ndarray:
        return np.array([self.intercepts.get(dimension, 0.0) for dimension in PSYCH_DIMENSIONS])


def load_lexicon(path: Path) -> Lexicon:
    """Read ``dimension,token,weight`` rows; ``_intercept`` rows set intercepts."""

    path = Path(path)
    if not path.exists():
        raise DataError(f"Lexicon not found: {path}")

    weights: Dict[str, Dict[str, float]] = {}
    intercepts: Dict[str, float] = {}
    with path.open(encoding="utf-8", newline="") as handle:
        for line_number, row in enumerate(csv.reader(handle), start=1):
            if not row or row[0].startswith("#") or (line_number == 1 and row == ["dimension", "token", "weight"]):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{line_number}: expected dimension,token,weight")
            dimension, token, raw = (cell.strip() for cell in row)
            try:
                value = float(raw)
            except ValueError as exc:
                raise DataError(f"{path}:{line_number}: weight {raw!r} is not a number") from exc
            if token == INTERCEPT_TOKEN:
                intercepts[dimension] = value
            else:
                weights.setdefault(dimension, {})[token.lower()] = value

    lexicon = Lexicon(weights=weights, intercepts=intercepts)
    LOGGER.info("Loaded lexicon with %d weighted tokens from %s", sum(map(len, weights.values())), path)
    return lexicon


def write_lexicon(lexicon: Lexicon, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["dimension", "token", "weight"])
        for dimension in PSYCH_DIMENSIONS:
            if dimension in lexicon.intercepts:
                writer.writerow([dimension, INTERCEPT_TOKEN, repr(lexicon.intercepts[dimension])])
            for token, weight in sorted(lexicon.weights.get(dimension, {}).items()):
                writer.writerow([dimension, token, repr(weight)])


def extract_psych(text: str, lexicon: Lexicon) -> PsychDims:
    """Score ``text`` on every dimension; empty text yields the intercepts."""

    scores = lexicon.intercept_vector()
    tokens = tokenize(text)
    if not tokens:
        return PsychDims(scores)

    total = len(tokens)
    counts = Counter(tokens)
    for index, dimension in enumerate(PSYCH_DIMENSIONS):
        table = lexicon.weights.get(dimension)
        if not table:
            continue
        scores[index] += sum(table[token] * count / total for token, count in counts.items() if token in table)
    return PsychDims(scores)


def extract_psych_matrix(texts: Iterable[str], lexicon: Lexicon) -> np.ndarray:
    rows = [extract_psych(text, lexicon).values for text in texts]
    if not rows:
        return np.zeros((0, len(PSYCH_DIMENSIONS)))
    return np.vstack(rows)


@dataclass
class ScalerParams:
    teacher_mean: float
    teacher_std: float
    per_dim_mean: List[float]
    per_dim_std: List[float]

    def __post_init__(self) -> None:
        if len(self.per_dim_mean) != len(PSYCH_DIMENSIONS) or len(self.per_dim_std) != len(PSYCH_DIMENSIONS):
            raise DataError("Scaler needs one mean and one std per psych dimension")
        if not self.teacher_std > 0:
            raise NumericalError("Scaler teacher_std must be positive")
        for dimension, std in zip(PSYCH_DIMENSIONS, self.per_dim_std):
            if not std > 0:
                raise NumericalError(f"Scaler std for {dimension} must be positive")

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "ScalerParams":
        path = Path(path)
        if not path.exists():
            raise DataError(f"Scaler file not found: {path}")
        try:
            return cls(**json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"{path}: malformed scaler file") from exc


def fit_scaler(teacher_matrix: np.ndarray, psych_matrix: np.ndarray) -> ScalerParams:
    """Fit pooled teacher statistics and column-wise psych statistics.

    All standard deviations are population (``ddof=0``).

    Raises:
        DataError: when fewer than two rows are given or shapes disagree.
        NumericalError: when a psych column is constant; the message names it.
    """

    teacher_matrix = np.asarray(teacher_matrix, dtype=np.float64)
    psych_matrix = np.asarray(psych_matrix, dtype=np.float64)
    if teacher_matrix.ndim != 2 or psych_matrix.shape != (teacher_matrix.shape[0], len(PSYCH_DIMENSIONS)):
        raise DataError(f"Scaler inputs disagree: teacher {teacher_matrix.shape}, psych {psych_matrix.shape}")
    if teacher_matrix.shape[0] < 2:
        raise DataError("Scaler needs at least two rows")

    per_dim_std = psych_matrix.std(axis=0)
    for dimension, std in zip(PSYCH_DIMENSIONS, per_dim_std):
        if std <= MIN_STD:
            raise NumericalError(f"Psych dimension {dimension} has zero variance")

    teacher_std = float(teacher_matrix.std())
    if teacher_std <= MIN_STD:
        raise NumericalError("Teacher embeddings have zero variance")

    return ScalerParams(
        teacher_mean=float(teacher_matrix.mean()),
        teacher_std=teacher_std,
        per_dim_mean=psych_matrix.mean(axis=0).tolist(),
        per_dim_std=per_dim_std.tolist(),
    )


def standardize_psych(psych: PsychDims, scaler: ScalerParams) -> PsychDims:
    return PsychDims(standardize_matrix(psych.values[None, :], scaler)[0])


def standardize_matrix(psych_matrix: np.ndarray, scaler: ScalerParams) -> np.ndarray:
    mean = np.asarray(scaler.per_dim_mean)
    std = np.asarray(scaler.per_dim_std)
    return (np.asarray(psych_matrix, dtype=np.float64) - mean) / std * scaler.teacher_std + scaler.teacher_mean