"""End-to-end runs on the desk-scale synthetic task."""

import copy
import json
from pathlib import Path

import numpy as np
import pytest

from xmal.config import RunConfig
from xmal.data.store import read_store
from xmal.evaluation.analysis import modality_overlap
from xmal.main import AlignmentPipeline
from xmal.training.trainer import validate

pytestmark = pytest.mark.slow

# latent 8, teacher 32, feature 16, 200 persons x 5 segments, noise 0.1, plus a
# per-speaker nuisance latent the untrained encoder cannot separate from content
DESK_SCALE = {
    "seed": 0,
    "synth": {
        "latent_dim": 8,
        "teacher_dim": 32,
        "feature_dim": 16,
        "frames": 10,
        "persons": 200,
        "segments_per_person": 5,
        "noise_std": 0.1,
        "nuisance_std": 5.0,
        "nuisance_scope": "person",
    },
    "train": {
        "loss": "nce",
        "optimizer": "adamw",
        "learning_rate": 1e-3,
        "weight_decay": 1e-2,
        "batch_size": 64,
        "epochs": 300,
        "split": [0.8, 0.1, 0.1],
    },
    "eval": {"folds": 10},
}


def _pipeline(tmp_path: Path, **train_overrides) -> AlignmentPipeline:
    payload = copy.deepcopy(DESK_SCALE)
    payload["paths"] = {"data_dir": str(tmp_path / "data"), "out_dir": str(tmp_path / "runs")}
    payload["train"].update(train_overrides)
    pipeline = AlignmentPipeline(RunConfig.from_mapping(payload))
    pipeline.synth()
    pipeline.extract_psych()
    pipeline.build_targets()
    return pipeline


def test_nce_alignment_raises_cosine_and_overlap(tmp_path: Path) -> None:
    pipeline = _pipeline(tmp_path)
    targets = read_store(pipeline.artifact("targets.xmal"))
    val_pairs = pipeline._pairs(pipeline.load_split().val, targets)

    untrained = pipeline.fresh_student(targets.dim)
    before = validate(untrained, val_pairs)
    untrained_store = pipeline.embed(model=untrained, output=tmp_path / "untrained.xmal")

    model, history = pipeline.train()
    after = validate(model, val_pairs)
    trained_store = pipeline.embed(model=model)

    assert before < 0.2
    assert after > 0.8
    assert after == pytest.approx(max(history.val_cosine), abs=1e-9)

    ids = targets.ids
    overlap_before = modality_overlap(untrained_store.rows(ids), targets.rows(ids)).overlap_coefficient
    overlap_after = modality_overlap(trained_store.rows(ids), targets.rows(ids)).overlap_coefficient
    assert overlap_after - overlap_before >= 0.2


def test_report_compares_losses_with_untrained_student(tmp_path: Path) -> None:
    pipeline = _pipeline(tmp_path)
    table = pipeline.report()

    assert table.models == ["untrained", "cs", "nce"]
    untrained = table.row("untrained", "latent_score")
    aligned = table.row("nce", "latent_score")
    assert aligned.pearson_r - untrained.pearson_r >= 0.2
    assert aligned.p_vs_baseline is not None and aligned.p_vs_baseline < 0.05
    assert aligned.significant
    assert untrained.p_vs_baseline is None

    report_dir = tmp_path / "runs" / "report"
    rows = [json.loads(line) for line in (report_dir / "report.jsonl").read_text(encoding="utf-8").splitlines()]
    assert {row["model"] for row in rows} == {"untrained", "cs", "nce"}
    rendered = (report_dir / "report.txt").read_text(encoding="utf-8")
    nce_line = next(line for line in rendered.splitlines() if line.startswith("nce "))
    assert "*" in nce_line


def test_same_seed_reproduces_embeddings(tmp_path: Path) -> None:
    stores = []
    for name in ("first", "second"):
        pipeline = _pipeline(tmp_path / name, epochs=3)
        model, _ = pipeline.train()
        stores.append(pipeline.embed(model=model).matrix)
    np.testing.assert_array_equal(stores[0], stores[1])
