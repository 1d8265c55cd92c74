"""Student checkpoints: one embedding-store file per tensor plus a JSON index."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..data.store import EmbeddingStore, read_store, write_store
from ..errors import DataError
from ..features.targets import TargetMode
from .encoder import BACKBONES, StudentModel

LOGGER = logging.getLogger(__name__)

INDEX_FILE = "checkpoint.json"


def save_checkpoint(model: StudentModel, directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, tensor in model.parameters().items():
        matrix = tensor if tensor.ndim == 2 else tensor.reshape(1, -1)
        filename = f"{name}.xmal"
        rows = [str(row) for row in range(matrix.shape[0])]
        write_store(EmbeddingStore(ids=rows, matrix=matrix), directory / filename)
        tensors.append({"name": name, "shape": list(tensor.shape), "file": filename})

    index = {
        "mode": {
            "kind": model.mode.kind.value,
            "replace_count": model.mode.replace_count,
            "replace_offset": model.mode.replace_offset,
        },
        "tanh_scope": model.tanh_scope,
        "backbone": {
            "kind": model.backbone.kind,
            "feature_dim": model.backbone.feature_dim,
            "d_model": model.backbone.d_model,
        },
        "tensors": tensors,
    }
    path = directory / INDEX_FILE
    path.write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    LOGGER.info("Saved checkpoint to %s", directory)
    return path


def load_checkpoint(directory: Path) -> StudentModel:
    directory = Path(directory)
    path = directory / INDEX_FILE
    if not path.exists():
        raise DataError(f"Checkpoint index not found: {path}")
    try:
        index = json.loads(path.read_text(encoding="utf-8"))
        backbone_spec = index["backbone"]
        backbone_cls = BACKBONES[backbone_spec["kind"]]
        model = StudentModel(
            backbone=backbone_cls(backbone_spec["feature_dim"], backbone_spec["d_model"]),
            mode=TargetMode(**index["mode"]),
            tanh_scope=index["tanh_scope"],
        )
        entries = index["tensors"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed checkpoint index ({exc})") from exc

    values = {}
    for entry in entries:
        matrix = read_store(directory / entry["file"]).matrix
        shape = tuple(entry["shape"])
        if int(np.prod(shape)) != matrix.size:
            raise DataError(f"Tensor {entry['name']} payload does not match shape {shape}")
        values[entry["name"]] = matrix.reshape(shape).astype(np.float64)
    model.load_parameters(values)
    LOGGER.info("Loaded checkpoint from %s", directory)
    return model
