"""Pipeline orchestrator.

:class:`AlignmentPipeline` wires the library modules into the command sequence
``synth → extract-psych → build-targets → train → embed → eval → analyze`` and
keeps every intermediate artifact under ``paths.out_dir``. Each method reads its
inputs from disk, so commands can run in separate processes, and writes its
outputs deterministically so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .config import RunConfig
from .data.records import (
    DatasetSplit,
    PersonRecord,
    SegmentRecord,
    load_all_features,
    load_manifest,
    load_outcomes,
    split_dataset,
)
from .data.store import EmbeddingStore, read_store, write_store
from .data.synthetic import SyntheticCorpusGenerator
from .errors import DataError, NumericalError
from .evaluation.analysis import (
    dim_psych_heatmap,
    modality_overlap,
    ngram_correlation,
    render_heatmap,
    render_overlap,
    write_heatmap,
)
from .evaluation.evaluator import ComparisonTable, evaluate_models, person_matrix, psych_outcomes, ridge_cv
from .features.psych import PSYCH_DIMENSIONS, extract_psych_matrix, fit_scaler, load_lexicon, standardize_matrix
from .features.targets import TargetKind, build_targets
from .features.teacher import PrecomputedTeacher
from .training.checkpoint import load_checkpoint, save_checkpoint
from .training.encoder import StudentModel, build_student, embed_records
from .training.losses import LossKind
from .training.trainer import TrainHistory, TrainingPairs, train
from .validators.artifact_validator import validate_matrix

LOGGER = logging.getLogger(__name__)

PSYCH_STORE = "psych.xmal"
TARGET_STORE = "targets.xmal"
SPLIT_FILE = "split.json"
SCALER_FILE = "scaler.json"
CHECKPOINT_DIR = "checkpoint"
HISTORY_FILE = "history.jsonl"
EMBEDDING_STORE = "embeddings.xmal"
REPORT_ROWS = "report.jsonl"
REPORT_TABLE = "report.txt"
ANALYSIS_DIR = "analysis"
UNTRAINED = "untrained"


class AlignmentPipeline:
    """Runs each command of the alignment workflow against one :class:`RunConfig`."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self._records: Optional[List[SegmentRecord]] = None

    @property
    def out_dir(self) -> Path:
        return self.config.out_dir

    def artifact(self, name: str, root: Optional[Path] = None) -> Path:
        return (root or self.out_dir) / name

    def require_artifact(self, name: str, root: Optional[Path] = None) -> Path:
        path = self.artifact(name, root)
        if not path.exists():
            raise DataError(f"Missing prerequisite artifact {path}; run the earlier command first")
        return path

    # ------------------------------------------------------------------ inputs

    def records(self) -> List[SegmentRecord]:
        if self._records is None:
            manifest = self.config.require_paths("manifest")["manifest"]
            self._records = load_manifest(manifest)
            if not self._records:
                raise DataError(f"Manifest {manifest} has no segments")
        return self._records

    def features(self, records: List[SegmentRecord]) -> List[np.ndarray]:
        return load_all_features(records, self.config.paths.resolve("manifest").parent)

    def outcomes(self) -> Dict[str, PersonRecord]:
        return load_outcomes(self.config.require_paths("outcomes")["outcomes"])

    def load_split(self) -> DatasetSplit:
        path = self.require_artifact(SPLIT_FILE)
        try:
            return DatasetSplit.from_json(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed split file") from exc

    # ---------------------------------------------------------------- commands

    def synth(self, output_root: Optional[Path] = None) -> Dict[str, Path]:
        """Generate the synthetic corpus into ``paths.data_dir`` (or ``output_root``)."""

        generator = SyntheticCorpusGenerator(self.config.synth)
        corpus = generator.generate()
        return generator.export(corpus, output_root or Path(self.config.paths.data_dir))

    def extract_psych(self) -> Path:
        """Score every manifest segment with the lexicon into ``psych.xmal`` (unscaled)."""

        lexicon = load_lexicon(self.config.require_paths("lexicon")["lexicon"])
        records = self.records()
        matrix = extract_psych_matrix((record.text for record in records), lexicon)
        path = self.artifact(PSYCH_STORE)
        self._write_store([record.segment_id for record in records], matrix, path, "psych scores")
        return path

    def build_targets(self) -> Path:
        """Split persons, fit the scaler on training segments, and write every segment's target."""

        config = self.config
        teacher_path = config.require_paths("teacher")["teacher"]
        records = self.records()
        mode = config.target_mode()
        teacher = PrecomputedTeacher.from_path(teacher_path)
        mode.check_teacher_dim(teacher.dim)
        segment_ids = [record.segment_id for record in records]
        teacher_matrix = teacher.embed(segment_ids, [record.text for record in records])

        persons = sorted({record.person_id for record in records})
        person_split = split_dataset(persons, config.split_ratios(), config.section_seed(config.train))
        buckets = {pid: name for name in ("train", "val", "test") for pid in getattr(person_split, name)}
        split = DatasetSplit(
            train=[r.segment_id for r in records if buckets[r.person_id] == "train"],
            val=[r.segment_id for r in records if buckets[r.person_id] == "val"],
            test=[r.segment_id for r in records if buckets[r.person_id] == "test"],
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifact(SPLIT_FILE).write_text(json.dumps(split.to_json(), indent=2) + "\n", encoding="utf-8")
        LOGGER.info(
            "Split %d persons into %d/%d/%d segments",
            len(persons),
            len(split.train),
            len(split.val),
            len(split.test),
        )

        psych_scaled = None
        if mode.kind is not TargetKind.SEMANTIC:
            psych = read_store(self.require_artifact(PSYCH_STORE)).rows(segment_ids).astype(np.float64)
            train_ids = set(split.train)
            train_rows = [index for index, sid in enumerate(segment_ids) if sid in train_ids]
            scaler = fit_scaler(teacher_matrix[train_rows], psych[train_rows])
            scaler.save(self.artifact(SCALER_FILE))
            psych_scaled = standardize_matrix(psych, scaler)

        targets = build_targets(teacher_matrix, psych_scaled, mode)
        path = self.artifact(TARGET_STORE)
        self._write_store(segment_ids, targets, path, f"{mode.kind.value} targets")
        return path

    def train(
        self, loss_kind: Optional[LossKind] = None, output_root: Optional[Path] = None
    ) -> Tuple[StudentModel, TrainHistory]:
        """Train a student on the train split, selecting on the val split; write checkpoint and history."""

        train_config = self.config.train_config()
        if loss_kind is not None:
            train_config.loss_kind = LossKind(loss_kind)
        split = self.load_split()
        targets = read_store(self.require_artifact(TARGET_STORE))
        model = self.fresh_student(targets.dim)

        train_pairs = self._pairs(split.train, targets)
        val_pairs = self._pairs(split.val or split.train, targets)
        model, history = train(train_config, train_pairs, val_pairs, model)

        root = output_root or self.out_dir
        save_checkpoint(model, self.artifact(CHECKPOINT_DIR, root))
        history.write(self.artifact(HISTORY_FILE, root))
        return model, history

    def fresh_student(self, target_dim: int) -> StudentModel:
        mode = self.config.target_mode()
        d_model = target_dim - (len(PSYCH_DIMENSIONS) if mode.kind is TargetKind.PROJECTION else 0)
        features = self.features(self.records()[:1])
        return build_student(
            feature_dim=features[0].shape[1],
            d_model=d_model,
            mode=mode,
            seed=self.config.section_seed(self.config.model),
            tanh_scope=self.config.model.tanh_scope,
            backbone=self.config.model.backbone,
        )

    def embed(
        self,
        checkpoint: Optional[Path] = None,
        output: Optional[Path] = None,
        model: Optional[StudentModel] = None,
    ) -> EmbeddingStore:
        """Encode every manifest segment with a trained (or given) student."""

        if model is None:
            model = load_checkpoint(checkpoint or self.require_artifact(CHECKPOINT_DIR))
        records = self.records()
        matrix = embed_records(model, self.features(records))
        store = self._write_store(
            [record.segment_id for record in records], matrix, output or self.artifact(EMBEDDING_STORE), "embeddings"
        )
        return store

    def evaluate(
        self,
        stores: Optional[Mapping[str, Path]] = None,
        baseline: Optional[str] = None,
        output_root: Optional[Path] = None,
    ) -> ComparisonTable:
        """Cross-validate person-level ridge models per store and write the comparison report."""

        config = self.config
        records = self.records()
        if not stores:
            stores = {"student": self.require_artifact(EMBEDDING_STORE)}
        models = {name: person_matrix(read_store(Path(path)), records) for name, path in stores.items()}
        if config.eval.include_teacher:
            teacher = read_store(config.require_paths("teacher")["teacher"])
            models["teacher"] = person_matrix(teacher, records)

        outcomes = self.outcomes()
        if config.eval.include_psych_outcomes:
            psych = psych_outcomes(read_store(self.require_artifact(PSYCH_STORE)), records)
            for pid, person in psych.items():
                outcomes.setdefault(pid, PersonRecord(pid)).outcome_scores.update(person.outcome_scores)

        table = evaluate_models(models, outcomes, config.eval_config(baseline))
        root = output_root or self.out_dir
        table.write_jsonl(self.artifact(REPORT_ROWS, root))
        table.write_text(self.artifact(REPORT_TABLE, root))
        return table

    def analyze(self, render: Optional[bool] = None) -> Dict[str, Path]:
        """Overlap of student and target embeddings, teacher × psych heatmap, and n-gram tables."""

        config = self.config.analysis
        render = config.render if render is None else render
        records = self.records()
        segment_ids = [record.segment_id for record in records]
        directory = self.artifact(ANALYSIS_DIR)
        directory.mkdir(parents=True, exist_ok=True)
        written: Dict[str, Path] = {}

        student = read_store(self.require_artifact(EMBEDDING_STORE)).rows(segment_ids)
        targets = read_store(self.require_artifact(TARGET_STORE)).rows(segment_ids)
        overlap = modality_overlap(student, targets, normalize=config.normalize_overlap)
        overlap.write(directory, labels=("student", "target"))
        written["overlap"] = directory / "overlap.json"
        if render:
            render_overlap(overlap, directory / "overlap.png", labels=("student", "target"))

        psych_path = self.artifact(PSYCH_STORE)
        if psych_path.exists():
            teacher = read_store(self.config.require_paths("teacher")["teacher"]).rows(segment_ids)
            heatmap = dim_psych_heatmap(teacher, read_store(psych_path).rows(segment_ids))
            write_heatmap(heatmap, directory / "heatmap.csv")
            written["heatmap"] = directory / "heatmap.csv"
            if render:
                render_heatmap(heatmap, directory / "heatmap.png")
        else:
            LOGGER.warning("No %s in %s; skipping the dimension heatmap", PSYCH_STORE, self.out_dir)

        written.update(self._ngram_tables(records, directory))
        return written

    def report(self) -> ComparisonTable:
        """Train CS and NCE students from one init and compare them with the untrained student."""

        root = self.artifact("report")
        targets = read_store(self.require_artifact(TARGET_STORE))
        stores: Dict[str, Path] = {}

        untrained = self.fresh_student(targets.dim)
        stores[UNTRAINED] = root / UNTRAINED / EMBEDDING_STORE
        self.embed(model=untrained, output=stores[UNTRAINED])
        for kind in (LossKind.CS, LossKind.NCE):
            directory = root / kind.value
            model, _ = self.train(loss_kind=kind, output_root=directory)
            stores[kind.value] = directory / EMBEDDING_STORE
            self.embed(model=model, output=stores[kind.value])
        return self.evaluate(stores, baseline=UNTRAINED, output_root=root)

    # ----------------------------------------------------------------- helpers

    def _pairs(self, segment_ids: List[str], targets: EmbeddingStore) -> TrainingPairs:
        by_id = {record.segment_id: record for record in self.records()}
        missing = [sid for sid in segment_ids if sid not in by_id]
        if missing:
            raise DataError(f"Split names segment {missing[0]} that is not in the manifest")
        chosen = [by_id[sid] for sid in segment_ids]
        return TrainingPairs(list(segment_ids), self.features(chosen), targets.rows(segment_ids))

    def _write_store(self, ids: List[str], matrix: np.ndarray, path: Path, name: str) -> EmbeddingStore:
        if not validate_matrix(matrix, name, rows=len(ids)):
            raise NumericalError(f"Refusing to write invalid {name} to {path}")
        store = EmbeddingStore(ids=ids, matrix=matrix)
        write_store(store, path)
        return store

    def _ngram_tables(self, records: List[SegmentRecord], directory: Path) -> Dict[str, Path]:
        """Correlate n-grams with out-of-fold student predictions (observed outcome as comparison)."""

        config = self.config
        outcomes = self.outcomes()
        names = sorted({name for person in outcomes.values() for name in person.outcome_scores})
        if config.analysis.outcome is not None:
            if config.analysis.outcome not in names:
                raise DataError(f"Outcome {config.analysis.outcome!r} not in the outcome table")
            names = [config.analysis.outcome]

        texts: Dict[str, List[str]] = defaultdict(list)
        for record in records:
            texts[record.person_id].append(record.text)
        vectors = person_matrix(read_store(self.require_artifact(EMBEDDING_STORE)), records)
        eval_config = config.eval_config()

        written: Dict[str, Path] = {}
        for name in names:
            persons = sorted(pid for pid, person in outcomes.items() if name in person.outcome_scores)
            observed = np.array([outcomes[pid].outcome_scores[name] for pid in persons])
            features = np.vstack([vectors[pid] for pid in persons])
            fit = ridge_cv(features, observed, eval_config.folds, eval_config.lambda_grid, eval_config.seed, persons)
            table = ngram_correlation(
                texts,
                dict(zip(persons, fit.predictions.tolist())),
                n_max=config.analysis.n_max,
                min_person_freq=config.analysis.min_person_freq,
                compare_scores=dict(zip(persons, observed.tolist())),
                top=config.analysis.top,
                alpha=config.analysis.alpha,
            )
            path = directory / f"ngrams_{name}.csv"
            table.write(path)
            written[f"ngrams_{name}"] = path
        return written
