"""Interpretability analyses.

* modality overlap: joint PCA of student and teacher embeddings followed by the
  overlapping coefficient of their Gaussian KDEs on a shared grid;
* teacher-dimension × psych-dimension correlation heatmap;
* n-gram correlation against person-level scores with BH correction.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as scipy_stats
from sklearn.decomposition import PCA

from ..errors import DataError, NumericalError
from ..features.psych import PSYCH_DIMENSIONS, tokenize
from .stats import bh_adjust, correlation_pvalue, pearson

LOGGER = logging.getLogger(__name__)

GRID_SIZE = 64
GRID_PADDING = 0.1


@dataclass
class PCAResult:
    coords: np.ndarray
    explained_variance_ratio: np.ndarray
    components: np.ndarray
    mean: np.ndarray


def pca_2d(matrix: np.ndarray) -> PCAResult:
    """Project mean-centered rows onto the top two principal axes.

    Each axis is signed so its largest-magnitude loading is positive.
    """

    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 3 or matrix.shape[1] < 2:
        raise DataError(f"pca_2d needs at least 3 rows and 2 columns, got shape {matrix.shape}")
    if not np.any(matrix.var(axis=0) > 0):
        raise NumericalError("pca_2d input has rank 0")

    pca = PCA(n_components=2, svd_solver="full")
    pca.fit(matrix)
    components = pca.components_.copy()
    for axis in range(2):
        pivot = int(np.argmax(np.abs(components[axis])))
        if components[axis, pivot] < 0:
            components[axis] *= -1.0
    coords = (matrix - pca.mean_) @ components.T
    return PCAResult(
        coords=coords,
        explained_variance_ratio=np.asarray(pca.explained_variance_ratio_, dtype=np.float64),
        components=components,
        mean=pca.mean_.copy(),
    )


def _fit_kde(coords: np.ndarray, name: str) -> scipy_stats.gaussian_kde:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 2:
        raise DataError(f"{name} must be an N×2 matrix with N >= 2, got shape {coords.shape}")
    if np.any(np.ptp(coords, axis=0) == 0):
        raise NumericalError(f"{name} has a zero-variance coordinate")
    try:
        return scipy_stats.gaussian_kde(coords.T, bw_method="scott")
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{name} has a singular covariance") from exc


def overlap_grid(
    coords_a: np.ndarray, coords_b: np.ndarray, size: int = GRID_SIZE, padding: float = GRID_PADDING
) -> Tuple[np.ndarray, np.ndarray]:
    """Shared evaluation grid over the joint bounding box padded by ``padding``."""

    joined = np.vstack([coords_a, coords_b])
    low = joined.min(axis=0)
    high = joined.max(axis=0)
    margin = (high - low) * padding
    xs = np.linspace(low[0] - margin[0], high[0] + margin[0], size)
    ys = np.linspace(low[1] - margin[1], high[1] + margin[1], size)
    return xs, ys


def kde_overlap(
    coords_a: np.ndarray, coords_b: np.ndarray, size: int = GRID_SIZE, renormalize: bool = False
) -> float:
    """Overlapping coefficient ``sum(min(p_a, p_b)) * cell_area`` of two 2-D Gaussian KDEs (Scott bandwidth).

    The densities are the raw KDE values on the grid, so mass falling outside the
    padded box is not counted. ``renormalize`` scales each density to unit mass on
    the grid first.
    """

    kde_a = _fit_kde(coords_a, "coords_a")
    kde_b = _fit_kde(coords_b, "coords_b")
    xs, ys = overlap_grid(coords_a, coords_b, size)
    cell_area = (xs[1] - xs[0]) * (ys[1] - ys[0])
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    points = np.vstack([grid_x.ravel(), grid_y.ravel()])

    densities = []
    for kde in (kde_a, kde_b):
        density = kde(points)
        mass = density.sum() * cell_area
        densities.append(density / mass if renormalize and mass > 0 else density)
    overlap = float(np.minimum(*densities).sum() * cell_area)
    return float(np.clip(overlap, 0.0, 1.0))


@dataclass
class OverlapReport:
    pca_coords_a: np.ndarray
    pca_coords_b: np.ndarray
    overlap_coefficient: float
    explained_variance_ratio: np.ndarray
    grid_size: int = GRID_SIZE
    grid_padding: float = GRID_PADDING

    def write(self, directory: Path, labels: Tuple[str, str] = ("student", "teacher")) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with (directory / "overlap_coords.jsonl").open("w", encoding="utf-8", newline="\n") as handle:
            for label, coords in zip(labels, (self.pca_coords_a, self.pca_coords_b)):
                for x, y in coords.tolist():
                    handle.write(json.dumps({"modality": label, "pc1": x, "pc2": y}) + "\n")
        summary = {
            "overlap_coefficient": self.overlap_coefficient,
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "grid_size": self.grid_size,
            "grid_padding": self.grid_padding,
        }
        (directory / "overlap.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        LOGGER.info("Saved overlap analysis to %s (coefficient %.4f)", directory, self.overlap_coefficient)


def modality_overlap(student: np.ndarray, teacher: np.ndarray, normalize: bool = True) -> OverlapReport:
    """Joint PCA of both embedding sets and the KDE overlap of their projections."""

    student = np.asarray(student, dtype=np.float64)
    teacher = np.asarray(teacher, dtype=np.float64)
    if student.shape[1] != teacher.shape[1]:
        raise DataError(f"Student dim {student.shape[1]} differs from teacher dim {teacher.shape[1]}")
    if normalize:
        student = student / np.linalg.norm(student, axis=1, keepdims=True)
        teacher = teacher / np.linalg.norm(teacher, axis=1, keepdims=True)
    projection = pca_2d(np.vstack([student, teacher]))
    coords_a = projection.coords[: len(student)]
    coords_b = projection.coords[len(student) :]
    return OverlapReport(
        pca_coords_a=coords_a,
        pca_coords_b=coords_b,
        overlap_coefficient=kde_overlap(coords_a, coords_b),
        explained_variance_ratio=projection.explained_variance_ratio,
    )


def dim_psych_heatmap(teacher_matrix: np.ndarray, psych_matrix: np.ndarray) -> np.ndarray:
    """Pearson r of every teacher column with every psych column (``d × 10``)."""

    teacher_matrix = np.asarray(teacher_matrix, dtype=np.float64)
    psych_matrix = np.asarray(psych_matrix, dtype=np.float64)
    if teacher_matrix.shape[0] != psych_matrix.shape[0] or psych_matrix.shape[1] != len(PSYCH_DIMENSIONS):
        raise DataError(f"Heatmap inputs disagree: {teacher_matrix.shape} vs {psych_matrix.shape}")
    if teacher_matrix.shape[0] < 3:
        raise DataError("Heatmap needs at least three rows")

    heatmap = np.zeros((teacher_matrix.shape[1], psych_matrix.shape[1]))
    degenerate = 0
    for i in range(teacher_matrix.shape[1]):
        for j in range(psych_matrix.shape[1]):
            correlation = pearson(teacher_matrix[:, i], psych_matrix[:, j])
            heatmap[i, j] = correlation.r
            degenerate += correlation.degenerate
    if degenerate:
        LOGGER.warning("%d heatmap cells had a constant column and were set to 0", degenerate)
    return heatmap


def write_heatmap(heatmap: np.ndarray, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["teacher_dim", *PSYCH_DIMENSIONS])
        for index, row in enumerate(heatmap):
            writer.writerow([index, *(f"{value:.6f}" for value in row)])
    LOGGER.info("Saved heatmap to %s", path)


@dataclass
class NgramRow:
    ngram: str
    r: float
    p_raw: float
    p_bh: float
    n_persons: int
    r_compare: Optional[float] = None


@dataclass
class NgramTable:
    positive: List[NgramRow] = field(default_factory=list)
    negative: List[NgramRow] = field(default_factory=list)
    tested: int = 0

    def write(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["direction", "ngram", "r", "r_compare", "p_raw", "p_bh", "n_persons"])
            for direction, rows in (("positive", self.positive), ("negative", self.negative)):
                for row in rows:
                    compare = "" if row.r_compare is None else f"{row.r_compare:.4f}"
                    p_values = [f"{row.p_raw:.3g}", f"{row.p_bh:.3g}"]
                    writer.writerow([direction, row.ngram, f"{row.r:.4f}", compare, *p_values, row.n_persons])
        LOGGER.info("Saved n-gram table to %s", path)


def person_ngram_frequencies(texts: Sequence[str], n_max: int) -> Dict[str, float]:
    """Relative frequency of every 1..n_max-gram, normalized within each order."""

    counts: Dict[int, Counter] = {n: Counter() for n in range(1, n_max + 1)}
    for text in texts:
        tokens = tokenize(text)
        for n in range(1, n_max + 1):
            counts[n].update(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    frequencies: Dict[str, float] = {}
    for counter in counts.values():
        total = sum(counter.values())
        for gram, count in counter.items():
            frequencies[gram] = count / total
    return frequencies


def ngram_correlation(
    texts_per_person: Mapping[str, Sequence[str]],
    scores: Mapping[str, float],
    n_max: int = 3,
    min_person_freq: int = 2,
    compare_scores: Optional[Mapping[str, float]] = None,
    top: Optional[int] = 20,
    alpha: Optional[float] = None,
) -> NgramTable:
    """Correlate per-person n-gram relative frequencies with ``scores``.

    Only n-grams used by at least ``min_person_freq`` persons are tested. P-values
    are BH-adjusted over every tested n-gram; ``alpha`` keeps rows whose adjusted
    p-value falls below it.
    """

    if not 1 <= n_max <= 3:
        raise DataError(f"n_max must lie in 1..3, got {n_max}")
    persons = sorted(set(texts_per_person) & set(scores))
    if len(persons) < 3:
        raise DataError("n-gram correlation needs at least three persons with texts and scores")
    values = np.array([scores[pid] for pid in persons], dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError("n-gram correlation scores must be finite")
    compare = None
    if compare_scores is not None:
        compare = np.array([compare_scores[pid] for pid in persons], dtype=np.float64)

    per_person = [person_ngram_frequencies(texts_per_person[pid], n_max) for pid in persons]
    usage = Counter(gram for frequencies in per_person for gram in frequencies)
    candidates = sorted(gram for gram, count in usage.items() if count >= min_person_freq)
    if not candidates:
        raise DataError(f"No n-gram is used by at least {min_person_freq} persons")

    rows: List[NgramRow] = []
    for gram in candidates:
        frequency = np.array([frequencies.get(gram, 0.0) for frequencies in per_person])
        correlation = pearson(frequency, values)
        if correlation.degenerate:
            continue
        r_compare = pearson(frequency, compare).r if compare is not None else None
        p_raw = correlation_pvalue(correlation.r, len(persons))
        rows.append(NgramRow(gram, correlation.r, p_raw, 1.0, usage[gram], r_compare))
    skipped = len(candidates) - len(rows)
    if skipped:
        LOGGER.warning("Skipped %d n-grams with constant frequency across persons", skipped)
    if not rows:
        raise DataError("Every candidate n-gram had constant frequency")

    for row, adjusted in zip(rows, bh_adjust(np.array([row.p_raw for row in rows]))):
        row.p_bh = max(float(adjusted), row.p_raw)
    if alpha is not None:
        rows = [row for row in rows if row.p_bh < alpha]

    positive = sorted((row for row in rows if row.r > 0), key=lambda row: (-abs(row.r), row.ngram))
    negative = sorted((row for row in rows if row.r < 0), key=lambda row: (-abs(row.r), row.ngram))
    if top is not None:
        positive, negative = positive[:top], negative[:top]
    return NgramTable(positive=positive, negative=negative, tested=len(candidates) - skipped)


def render_overlap(report: OverlapReport, path: Path, labels: Tuple[str, str] = ("student", "teacher")) -> None:
    """Draw KDE contours of both PCA clouds; needs the optional matplotlib extra."""

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs, ys = overlap_grid(report.pca_coords_a, report.pca_coords_b)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    points = np.vstack([grid_x.ravel(), grid_y.ravel()])
    fig, ax = plt.subplots(figsize=(5, 5))
    for coords, label, colour in zip((report.pca_coords_a, report.pca_coords_b), labels, ("tab:blue", "tab:red")):
        density = _fit_kde(coords, label)(points).reshape(grid_x.shape)
        ax.contour(grid_x, grid_y, density, colors=colour, levels=6)
        ax.plot([], [], color=colour, label=label)
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    ax.set_title(f"overlap = {report.overlap_coefficient:.3f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_heatmap(heatmap: np.ndarray, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, max(3, heatmap.shape[0] * 0.12)))
    image = ax.imshow(heatmap, aspect="auto", cmap="coolwarm", vmin=-1, vmax=1)
    ax.set_xticks(range(len(PSYCH_DIMENSIONS)), PSYCH_DIMENSIONS)
    ax.set_ylabel("teacher dimension")
    fig.colorbar(image, ax=ax, label="Pearson r")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
