"""Alignment training loop.

Teacher targets are fixed inputs; only the student's parameters move. The epoch
with the highest validation mean cosine similarity is kept.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DataError, NumericalError
from ..features.targets import TargetMode
from .encoder import StudentModel, embed_records
from .losses import LossConfig, LossKind, paired_cosine
from .optim import OPTIMIZERS, build_optimizer

LOGGER = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    weight_decay: float = 1e-2
    batch_size: int = 32
    epochs: int = 50
    temperature: float = 0.1
    loss_kind: LossKind = LossKind.NCE
    exclude_positive: bool = False
    mode: TargetMode = field(default_factory=TargetMode)
    optimizer: str = "sgd"
    momentum: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.loss_kind = LossKind(self.loss_kind)
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be nonnegative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")
        if self.loss_kind is LossKind.NCE and self.batch_size < 2:
            raise ConfigError("NCE training needs batch_size >= 2")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"Unknown optimizer {self.optimizer!r}")

    @property
    def loss(self) -> LossConfig:
        return LossConfig(self.loss_kind, self.temperature, self.exclude_positive)


@dataclass
class TrainingPairs:
    """Segment features paired row-by-row with their alignment targets."""

    segment_ids: List[str]
    features: List[np.ndarray]
    targets: np.ndarray

    def __post_init__(self) -> None:
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if not (len(self.segment_ids) == len(self.features) == len(self.targets)):
            raise DataError("segment_ids, features, and targets must have equal length")

    def __len__(self) -> int:
        return len(self.segment_ids)


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_cosine: List[float] = field(default_factory=list)
    best_epoch: int = -1

    def records(self) -> List[Dict[str, float]]:
        return [
            {"epoch": epoch, "train_loss": loss, "val_cosine": cosine}
            for epoch, (loss, cosine) in enumerate(zip(self.train_loss, self.val_cosine))
        ]

    def write(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            for record in self.records():
                handle.write(json.dumps(record) + "\n")
        LOGGER.info("Saved training history to %s", path)


def validate(model: StudentModel, pairs: TrainingPairs) -> float:
    """Mean cosine similarity between encoded segments and their targets."""

    if len(pairs) == 0:
        raise DataError("Validation needs at least one pair")
    outputs = embed_records(model, pairs.features)
    return float(paired_cosine(outputs, pairs.targets).mean())


def batch_indices(count: int, batch_size: int, rng: np.random.Generator, drop_last: bool) -> List[np.ndarray]:
    """Shuffle ``range(count)`` and cut it into batches.

    A trailing partial batch is dropped when ``drop_last`` is set and at least one
    full batch exists.
    """

    order = rng.permutation(count)
    batches = [order[start : start + batch_size] for start in range(0, count, batch_size)]
    if drop_last and len(batches) > 1 and len(batches[-1]) < batch_size:
        batches.pop()
    return batches


def _check_pairs(pairs: TrainingPairs, model: StudentModel, name: str) -> None:
    if len(pairs) == 0:
        raise DataError(f"{name} pairs are empty")
    if pairs.targets.ndim != 2 or pairs.targets.shape[1] != model.output_dim:
        raise DataError(
            f"{name} targets have shape {pairs.targets.shape}; "
            f"mode {model.mode.kind.value} needs dim {model.output_dim}"
        )


def train(
    config: TrainConfig, train_pairs: TrainingPairs, val_pairs: TrainingPairs, model: StudentModel
) -> Tuple[StudentModel, TrainHistory]:
    """Fit ``model`` in place and return it with the best validation parameters loaded.

    Raises:
        NumericalError: when a batch loss is NaN or infinite; the message carries
            the epoch and batch index.
    """

    history = TrainHistory()
    if config.epochs == 0:
        LOGGER.info("epochs=0; returning the model unchanged")
        return model, history

    _check_pairs(train_pairs, model, "Training")
    _check_pairs(val_pairs, model, "Validation")
    if config.mode.kind is not model.mode.kind:
        raise ConfigError(f"Config mode {config.mode.kind.value} does not match model mode {model.mode.kind.value}")
    if config.loss_kind is LossKind.NCE and len(train_pairs) < 2:
        raise DataError("NCE training needs at least two training pairs")

    rng = np.random.default_rng(config.seed)
    loss = config.loss
    optimizer = build_optimizer(
        config.optimizer, model.parameters(), config.learning_rate, config.weight_decay, momentum=config.momentum
    )
    best_cosine = -math.inf
    best_params: Optional[Dict[str, np.ndarray]] = None
    drop_last = config.loss_kind is LossKind.NCE

    for epoch in range(config.epochs):
        total = 0.0
        seen = 0
        for batch_number, batch in enumerate(batch_indices(len(train_pairs), config.batch_size, rng, drop_last)):
            features: Sequence[np.ndarray] = [train_pairs.features[index] for index in batch]
            result, grads = model.loss_and_grads(features, train_pairs.targets[batch], loss)
            if not math.isfinite(result.value) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError(f"Non-finite loss at epoch {epoch}, batch {batch_number}")
            optimizer.step(grads)
            total += result.value
            seen += len(batch)
            LOGGER.debug("epoch %d batch %d loss %.6f", epoch, batch_number, result.value)

        history.train_loss.append(total / seen)
        cosine = validate(model, val_pairs)
        history.val_cosine.append(cosine)
        if cosine > best_cosine:
            best_cosine = cosine
            best_params = model.copy_parameters()
            history.best_epoch = epoch
        LOGGER.info("epoch %d train_loss %.6f val_cosine %.4f", epoch, history.train_loss[-1], cosine)

    if best_params is not None:
        model.load_parameters(best_params)
    LOGGER.info("Best epoch %d with validation cosine %.4f", history.best_epoch, best_cosine)
    return model, history
