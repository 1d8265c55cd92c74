from pathlib import Path

import pytest
import yaml

SMALL_RUN = {
    "seed": 3,
    "synth": {
        "persons": 8,
        "segments_per_person": 3,
        "latent_dim": 4,
        "teacher_dim": 12,
        "feature_dim": 6,
        "frames": 4,
    },
    "train": {"epochs": 1, "batch_size": 4, "learning_rate": 1e-3, "optimizer": "adamw"},
    "eval": {"folds": 3, "lambda_grid": [1.0]},
    "analysis": {"n_max": 2, "top": 5},
}


@pytest.fixture
def run_config_file(tmp_path: Path) -> Path:
    """A small YAML run config with data and outputs under ``tmp_path``."""

    payload = dict(SMALL_RUN)
    payload["paths"] = {"data_dir": str(tmp_path / "data"), "out_dir": str(tmp_path / "runs")}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")
    return path
