"""Person-level downstream evaluation.

Segment embeddings are averaged per person, each outcome is predicted with
grouped k-fold ridge regression, and models are compared on Pearson r, MSE,
and a paired t-test of squared errors against named baselines.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from sklearn.linear_model import Ridge

from ..data.records import PersonRecord, SegmentRecord, outcome_names
from ..data.store import EmbeddingStore
from ..errors import ConfigError, DataError
from ..features.psych import PSYCH_DIMENSIONS
from .stats import paired_ttest, pearson

LOGGER = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (1e-6, 1e-4, 1e-2, 1.0, 100.0, 10000.0)
INNER_VALIDATION_FRACTION = 0.1
SIGNIFICANCE_LEVEL = 0.05


@dataclass
class PersonEmbedding:
    person_id: str
    vector: np.ndarray
    n_segments: int


def aggregate_person(groups: Mapping[str, Sequence[np.ndarray]]) -> List[PersonEmbedding]:
    """Average each person's segment embeddings; output is sorted by person id."""

    people: List[PersonEmbedding] = []
    for person_id in sorted(groups):
        segments = groups[person_id]
        if len(segments) == 0:
            raise DataError(f"Person {person_id} has no segment embeddings")
        matrix = np.vstack([np.asarray(row, dtype=np.float64) for row in segments])
        people.append(PersonEmbedding(person_id, matrix.mean(axis=0), matrix.shape[0]))
    return people


def group_by_person(store: EmbeddingStore, records: Sequence[SegmentRecord]) -> Dict[str, List[np.ndarray]]:
    """Collect store rows per person using the manifest's segment-to-person map."""

    lookup = store.index()
    groups: Dict[str, List[np.ndarray]] = defaultdict(list)
    for record in records:
        if record.segment_id not in lookup:
            raise DataError(f"Store lacks segment {record.segment_id}")
        groups[record.person_id].append(store.matrix[lookup[record.segment_id]].astype(np.float64))
    return dict(groups)


def person_matrix(store: EmbeddingStore, records: Sequence[SegmentRecord]) -> Dict[str, np.ndarray]:
    return {person.person_id: person.vector for person in aggregate_person(group_by_person(store, records))}


def psych_outcomes(psych_store: EmbeddingStore, records: Sequence[SegmentRecord]) -> Dict[str, PersonRecord]:
    """Person-level mean psych scores as self-supervised outcomes."""

    persons: Dict[str, PersonRecord] = {}
    for person in aggregate_person(group_by_person(psych_store, records)):
        scores = {f"psych_{dim}": float(value) for dim, value in zip(PSYCH_DIMENSIONS, person.vector)}
        persons[person.person_id] = PersonRecord(person.person_id, scores)
    return persons


@dataclass
class RidgeFit:
    coef: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float

    def predict(self, features: np.ndarray) -> np.ndarray:
        return ((np.asarray(features, dtype=np.float64) - self.x_mean) / self.x_scale) @ self.coef + self.y_mean


def fit_ridge(
    features: np.ndarray, y: np.ndarray, lam: float, standardize: bool = True, center: bool = True
) -> RidgeFit:
    """Closed-form ridge ``(XᵀX + λI)⁻¹Xᵀy`` on optionally standardized X and centered y."""

    if not lam > 0:
        raise ConfigError(f"Ridge penalty must be strictly positive, got {lam}")
    features = np.asarray(features, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    columns = features.shape[1]
    x_mean = features.mean(axis=0) if standardize else np.zeros(columns)
    x_scale = features.std(axis=0) if standardize else np.ones(columns)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    y_mean = float(y.mean()) if center else 0.0

    model = Ridge(alpha=lam, fit_intercept=False, solver="cholesky")
    model.fit((features - x_mean) / x_scale, y - y_mean)
    return RidgeFit(coef=np.asarray(model.coef_, dtype=np.float64), x_mean=x_mean, x_scale=x_scale, y_mean=y_mean)


@dataclass
class CVResult:
    predictions: np.ndarray
    pearson_r: float
    mse: float
    fold_lambdas: List[float]
    degenerate: bool = False

    def squared_errors(self, y: np.ndarray) -> np.ndarray:
        return (self.predictions - np.asarray(y, dtype=np.float64)) ** 2


def _id_permutation(ids: Sequence[str], seed: int) -> List[str]:
    ordered = sorted(ids)
    return [ordered[index] for index in np.random.default_rng(seed).permutation(len(ordered))]


def assign_folds(ids: Sequence[str], k: int, seed: int) -> Dict[str, int]:
    """Seeded fold index per id; depends on the id set, not on row positions."""

    return {item: rank % k for rank, item in enumerate(_id_permutation(ids, seed))}


def _select_lambda(
    features: np.ndarray, y: np.ndarray, ids: Sequence[str], lambda_grid: Sequence[float], seed: int
) -> float:
    """Pick the grid value with the lowest inner validation error; ties go to the earlier value.

    The inner split holds out 10% of the ids. When that would leave fewer than two
    fitting rows, every id is held out once instead.
    """

    if len(lambda_grid) == 1 or len(ids) < 2:
        return float(min(lambda_grid))
    shuffled = _id_permutation(ids, seed)
    n_val = max(1, int(round(INNER_VALIDATION_FRACTION * len(shuffled))))
    if len(shuffled) - n_val >= 2:
        held_out = set(shuffled[:n_val])
        masks = [np.array([item in held_out for item in ids])]
    else:
        masks = [np.array([item == held for item in ids]) for held in shuffled]

    errors = []
    for lam in lambda_grid:
        squared: List[float] = []
        for val_mask in masks:
            fit = fit_ridge(features[~val_mask], y[~val_mask], lam)
            squared.extend(((fit.predict(features[val_mask]) - y[val_mask]) ** 2).tolist())
        errors.append(float(np.mean(squared)))
    return float(lambda_grid[int(np.argmin(errors))])


def ridge_cv(
    features: np.ndarray,
    y: np.ndarray,
    k: int = 10,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    seed: int = 0,
    ids: Optional[Sequence[str]] = None,
) -> CVResult:
    """Grouped k-fold ridge regression with per-fold inner lambda selection.

    Each row is one person; ``ids`` (default: row positions) decide fold
    membership so that reordering rows does not change any prediction.
    """

    features = np.asarray(features, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    count = features.shape[0]
    if y.shape != (count,):
        raise DataError(f"Outcome vector shape {y.shape} does not match {count} rows")
    if k < 2 or k > count:
        raise DataError(f"Need 2 <= k <= N, got k={k}, N={count}")
    if not lambda_grid or any(not lam > 0 for lam in lambda_grid):
        raise ConfigError("lambda_grid must hold strictly positive values")
    if not np.all(np.isfinite(features)) or not np.all(np.isfinite(y)):
        raise DataError("ridge_cv inputs must be finite")

    ids = [str(index) for index in range(count)] if ids is None else [str(item) for item in ids]
    if len(set(ids)) != count:
        raise DataError("ridge_cv ids must be unique, one per row")
    folds = assign_folds(ids, k, seed)
    fold_of_row = np.array([folds[item] for item in ids])

    predictions = np.zeros(count)
    fold_lambdas: List[float] = []
    for fold in range(k):
        test = fold_of_row == fold
        train_ids = [item for item, is_test in zip(ids, test) if not is_test]
        lam = _select_lambda(features[~test], y[~test], train_ids, lambda_grid, seed + fold + 1)
        fit = fit_ridge(features[~test], y[~test], lam)
        predictions[test] = fit.predict(features[test])
        fold_lambdas.append(lam)

    correlation = pearson(predictions, y)
    if correlation.degenerate:
        LOGGER.warning("Degenerate correlation in ridge_cv; reporting r = 0")
    return CVResult(
        predictions=predictions,
        pearson_r=correlation.r,
        mse=float(np.mean((predictions - y) ** 2)),
        fold_lambdas=fold_lambdas,
        degenerate=correlation.degenerate,
    )


@dataclass
class EvalConfig:
    folds: int = 10
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID
    seed: int = 0
    baseline: Optional[str] = None
    second_baseline: Optional[str] = None


@dataclass
class ComparisonRow:
    model: str
    outcome: str
    pearson_r: float
    mse: float
    n_persons: int
    degenerate: bool = False
    p_vs_baseline: Optional[float] = None
    significant: bool = False
    p_vs_second: Optional[float] = None
    significant_second: bool = False


@dataclass
class ComparisonTable:
    models: List[str]
    outcomes: List[str]
    rows: List[ComparisonRow] = field(default_factory=list)
    baseline: Optional[str] = None
    second_baseline: Optional[str] = None

    def row(self, model: str, outcome: str) -> ComparisonRow:
        for row in self.rows:
            if row.model == model and row.outcome == outcome:
                return row
        raise KeyError((model, outcome))

    def write_jsonl(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for row in self.rows:
                handle.write(json.dumps(asdict(row), sort_keys=True) + "\n")
        LOGGER.info("Saved report rows to %s", path)

    def render(self) -> str:
        """Model × outcome text table with r and mse columns and significance markers."""

        header = ["model"] + [f"{outcome} {metric}" for outcome in self.outcomes for metric in ("r", "mse")]
        lines = [header]
        for model in self.models:
            cells = [model]
            for outcome in self.outcomes:
                row = self.row(model, outcome)
                marker = ("*" if row.significant else "") + ("†" if row.significant_second else "")
                cells.append(f"{row.pearson_r:.3f}{marker}")
                cells.append(f"{row.mse:.3f}")
            lines.append(cells)

        widths = [max(len(line[col]) for line in lines) for col in range(len(header))]
        rendered = ["  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in lines]
        rendered.insert(1, "  ".join("-" * width for width in widths))
        notes = []
        if self.baseline:
            notes.append(f"* p < .05 vs {self.baseline} (paired t-test on squared errors)")
        if self.second_baseline:
            notes.append(f"† p < .05 vs {self.second_baseline} (paired t-test on squared errors)")
        return "\n".join(rendered + notes) + "\n"

    def write_text(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        LOGGER.info("Saved report table to %s", path)


def _mark(errors: np.ndarray, reference: np.ndarray) -> tuple[float, bool]:
    test = paired_ttest(errors, reference)
    better = float(errors.mean()) < float(reference.mean())
    return test.p, bool(not test.degenerate and test.p < SIGNIFICANCE_LEVEL and better)


def evaluate_models(
    person_embeddings: Mapping[str, Mapping[str, np.ndarray]],
    outcomes: Mapping[str, PersonRecord],
    config: EvalConfig,
) -> ComparisonTable:
    """Cross-validate every model on every outcome and mark significant gains.

    ``person_embeddings`` maps model name to ``{person_id: vector}``; every model
    must cover the same persons.
    """

    models = list(person_embeddings)
    if not models:
        raise DataError("No models to evaluate")
    person_sets = {name: set(vectors) for name, vectors in person_embeddings.items()}
    reference_persons = person_sets[models[0]]
    for name, persons in person_sets.items():
        if persons != reference_persons:
            raise DataError(f"Model {name} covers a different person set than {models[0]}")
    for baseline in (config.baseline, config.second_baseline):
        if baseline is not None and baseline not in person_embeddings:
            raise ConfigError(f"Baseline model {baseline!r} is not among the evaluated models")
    missing = sorted(set(outcomes) - reference_persons)
    if missing:
        raise DataError(f"Outcome persons without segments, first: {missing[0]}")

    table = ComparisonTable(
        models=models,
        outcomes=outcome_names(dict(outcomes)),
        baseline=config.baseline,
        second_baseline=config.second_baseline,
    )
    for outcome in table.outcomes:
        persons = sorted(pid for pid, record in outcomes.items() if outcome in record.outcome_scores)
        y = np.array([outcomes[pid].outcome_scores[outcome] for pid in persons])
        errors: Dict[str, np.ndarray] = {}
        rows: Dict[str, ComparisonRow] = {}
        for model in models:
            features = np.vstack([person_embeddings[model][pid] for pid in persons])
            result = ridge_cv(features, y, config.folds, config.lambda_grid, config.seed, ids=persons)
            errors[model] = result.squared_errors(y)
            rows[model] = ComparisonRow(model, outcome, result.pearson_r, result.mse, len(persons), result.degenerate)
            LOGGER.info("%s / %s: r=%.3f mse=%.4f", model, outcome, result.pearson_r, result.mse)

        for model, row in rows.items():
            if config.baseline and model != config.baseline:
                row.p_vs_baseline, row.significant = _mark(errors[model], errors[config.baseline])
            if config.second_baseline and model != config.second_baseline:
                row.p_vs_second, row.significant_second = _mark(errors[model], errors[config.second_baseline])
            table.rows.append(row)
    return table
