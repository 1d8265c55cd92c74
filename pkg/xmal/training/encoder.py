"""Student audio encoder.

The student is a pluggable backbone producing per-frame hidden states, masked
mean pooling, a linear dense head, and (in projection mode) a tanh head that
emits ten extra psych coordinates. Forward and backward passes are batched so
the trainer can work on ragged frame counts without Python-level loops.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DataError
from ..features.targets import N_PSYCH, TargetKind, TargetMode
from .losses import LossConfig, LossResult

LOGGER = logging.getLogger(__name__)

TANH_SCOPES = ("psych", "all")


class BackboneInterface(Protocol):
    """Maps a ``frames × feature_dim`` matrix to ``frames × d_model`` hidden states."""

    feature_dim: int
    d_model: int
    kind: str

    def parameters(self) -> Dict[str, np.ndarray]: ...

    def init_parameters(self, rng: np.random.Generator) -> None: ...

    def hidden_states(self, features: np.ndarray, context: Optional[Sequence[str]] = None) -> np.ndarray: ...

    def forward_batch(self, frames: np.ndarray) -> np.ndarray: ...

    def backward_batch(
        self, frames: np.ndarray, hidden: np.ndarray, grad_hidden: np.ndarray
    ) -> Dict[str, np.ndarray]: ...


class SyntheticBackbone:
    """Frame-wise ``tanh(x @ W)``; token context is accepted and ignored."""

    kind = "synthetic"

    def __init__(self, feature_dim: int, d_model: int) -> None:
        if feature_dim < 1 or d_model < 1:
            raise ConfigError("Backbone dimensions must be positive")
        self.feature_dim = feature_dim
        self.d_model = d_model
        self.weight = np.zeros((feature_dim, d_model))

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight}

    def init_parameters(self, rng: np.random.Generator) -> None:
        bound = 1.0 / np.sqrt(self.feature_dim)
        self.weight[...] = rng.uniform(-bound, bound, size=self.weight.shape)

    def hidden_states(self, features: np.ndarray, context: Optional[Sequence[str]] = None) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] != self.feature_dim:
            raise DataError(f"Expected frames x {self.feature_dim} features, got shape {features.shape}")
        return np.tanh(features @ self.weight)

    def forward_batch(self, frames: np.ndarray) -> np.ndarray:
        return np.tanh(frames @ self.weight)

    def backward_batch(self, frames: np.ndarray, hidden: np.ndarray, grad_hidden: np.ndarray) -> Dict[str, np.ndarray]:
        grad_pre = grad_hidden * (1.0 - hidden**2)
        return {"weight": np.einsum("nlf,nld->fd", frames, grad_pre)}


BACKBONES = {SyntheticBackbone.kind: SyntheticBackbone}


def mean_pool(hidden: np.ndarray) -> np.ndarray:
    hidden = np.asarray(hidden, dtype=np.float64)
    if hidden.ndim != 2 or hidden.shape[0] < 1:
        raise DataError("Cannot mean-pool an empty hidden-state sequence")
    return hidden.mean(axis=0)


def dense_pool(embedding: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Linear head ``W @ e + b`` with no activation."""

    embedding = np.asarray(embedding, dtype=np.float64)
    if weight.shape != (bias.shape[0], embedding.shape[0]):
        raise DataError(f"Dense head shape {weight.shape} / {bias.shape} does not fit input {embedding.shape}")
    return weight @ embedding + bias


def project_psych(embedding: np.ndarray, projection: np.ndarray) -> np.ndarray:
    embedding = np.asarray(embedding, dtype=np.float64)
    if projection.shape != (embedding.shape[0], N_PSYCH):
        raise DataError(f"Projection shape {projection.shape} does not fit input {embedding.shape}")
    return np.tanh(projection.T @ embedding)


def stack_frames(features: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-pad ragged feature matrices into ``(N, L_max, F)`` plus a frame mask."""

    if not features:
        raise DataError("No feature matrices to stack")
    lengths = [matrix.shape[0] for matrix in features]
    if min(lengths) < 1:
        raise DataError("Every segment needs at least one feature frame")
    feature_dims = {matrix.shape[1] for matrix in features}
    if len(feature_dims) != 1:
        raise DataError(f"Inconsistent feature dims in batch: {sorted(feature_dims)}")

    if len(set(lengths)) == 1:
        return np.stack(features).astype(np.float64), np.ones((len(features), lengths[0]))
    frames = np.zeros((len(features), max(lengths), feature_dims.pop()))
    mask = np.zeros((len(features), max(lengths)))
    for row, matrix in enumerate(features):
        frames[row, : matrix.shape[0]] = matrix
        mask[row, : matrix.shape[0]] = 1.0
    return frames, mask


@dataclass
class ForwardCache:
    frames: np.ndarray
    mask: np.ndarray
    hidden: np.ndarray
    pooled: np.ndarray
    dense: np.ndarray
    psych: Optional[np.ndarray] = None


@dataclass
class StudentModel:
    """Backbone plus pooling heads; ``projection`` exists only in projection mode."""

    backbone: BackboneInterface
    mode: TargetMode = field(default_factory=TargetMode)
    tanh_scope: str = "psych"
    dense_weight: np.ndarray = field(init=False, repr=False)
    dense_bias: np.ndarray = field(init=False, repr=False)
    projection: Optional[np.ndarray] = field(init=False, default=None, repr=False)

    def __post_init__(self) -> None:
        if self.tanh_scope not in TANH_SCOPES:
            raise ConfigError(f"tanh_scope must be one of {TANH_SCOPES}, got {self.tanh_scope!r}")
        d_model = self.backbone.d_model
        self.dense_weight = np.eye(d_model)
        self.dense_bias = np.zeros(d_model)
        if self.mode.kind is TargetKind.PROJECTION:
            self.projection = np.zeros((d_model, N_PSYCH))

    @property
    def d_model(self) -> int:
        return self.backbone.d_model

    @property
    def output_dim(self) -> int:
        return self.mode.target_dim(self.d_model)

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live views of every trainable tensor keyed by dotted name."""

        params = {f"backbone.{name}": tensor for name, tensor in self.backbone.parameters().items()}
        params["dense.weight"] = self.dense_weight
        params["dense.bias"] = self.dense_bias
        if self.projection is not None:
            params["projection.weight"] = self.projection
        return params

    def load_parameters(self, values: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(values) != set(params):
            raise DataError(f"Parameter names differ: expected {sorted(params)}, got {sorted(values)}")
        for name, tensor in params.items():
            if values[name].shape != tensor.shape:
                raise DataError(f"Parameter {name} has shape {values[name].shape}, expected {tensor.shape}")
            tensor[...] = values[name]

    def copy_parameters(self) -> Dict[str, np.ndarray]:
        return {name: tensor.copy() for name, tensor in self.parameters().items()}

    def forward_batch(self, features: Sequence[np.ndarray]) -> Tuple[np.ndarray, ForwardCache]:
        frames, mask = stack_frames(features)
        if frames.shape[2] != self.backbone.feature_dim:
            raise DataError(f"Features have dim {frames.shape[2]}, backbone expects {self.backbone.feature_dim}")
        hidden = self.backbone.forward_batch(frames)
        pooled = (hidden * mask[:, :, None]).sum(axis=1) / mask.sum(axis=1, keepdims=True)
        dense = pooled @ self.dense_weight.T + self.dense_bias
        cache = ForwardCache(frames=frames, mask=mask, hidden=hidden, pooled=pooled, dense=dense)
        if self.projection is None:
            return dense, cache

        cache.psych = np.tanh(dense @ self.projection)
        semantic = np.tanh(dense) if self.tanh_scope == "all" else dense
        return np.concatenate([semantic, cache.psych], axis=1), cache

    def backward_batch(self, grad_out: np.ndarray, cache: ForwardCache) -> Dict[str, np.ndarray]:
        grads: Dict[str, np.ndarray] = {}
        d_model = self.d_model
        if self.projection is None:
            grad_dense = grad_out
        else:
            grad_semantic = grad_out[:, :d_model]
            if self.tanh_scope == "all":
                grad_semantic = grad_semantic * (1.0 - np.tanh(cache.dense) ** 2)
            grad_pre = grad_out[:, d_model:] * (1.0 - cache.psych**2)
            grads["projection.weight"] = cache.dense.T @ grad_pre
            grad_dense = grad_semantic + grad_pre @ self.projection.T

        grads["dense.weight"] = grad_dense.T @ cache.pooled
        grads["dense.bias"] = grad_dense.sum(axis=0)
        grad_pooled = grad_dense @ self.dense_weight
        lengths = cache.mask.sum(axis=1)
        grad_hidden = grad_pooled[:, None, :] * (cache.mask / lengths[:, None])[:, :, None]
        for name, grad in self.backbone.backward_batch(cache.frames, cache.hidden, grad_hidden).items():
            grads[f"backbone.{name}"] = grad
        return grads

    def loss_and_grads(
        self, features: Sequence[np.ndarray], targets: np.ndarray, loss: LossConfig
    ) -> Tuple[LossResult, Dict[str, np.ndarray]]:
        outputs, cache = self.forward_batch(features)
        result = loss.evaluate(outputs, targets)
        return result, self.backward_batch(result.grad_wrt_students, cache)


def encode(model: StudentModel, acoustic_features: np.ndarray, context: Optional[Sequence[str]] = None) -> np.ndarray:
    """Embed one segment: backbone, mean pool, dense head, optional psych head."""

    hidden = model.backbone.hidden_states(acoustic_features, context)
    embedding = dense_pool(mean_pool(hidden), model.dense_weight, model.dense_bias)
    if model.projection is None:
        return embedding
    psych = project_psych(embedding, model.projection)
    semantic = np.tanh(embedding) if model.tanh_scope == "all" else embedding
    return np.concatenate([semantic, psych])


def embed_records(model: StudentModel, features: Sequence[np.ndarray], batch_size: int = 256) -> np.ndarray:
    """Batched :func:`encode` over many segments."""

    chunks: List[np.ndarray] = []
    for start in range(0, len(features), batch_size):
        outputs, _ = model.forward_batch(features[start : start + batch_size])
        chunks.append(outputs)
    if not chunks:
        return np.zeros((0, model.output_dim))
    return np.vstack(chunks)


def init_parameters(model: StudentModel, seed: int) -> None:
    """Seeded init: uniform(±1/sqrt(d_model)) for dense and projection weights, zero bias."""

    rng = np.random.default_rng(seed)
    model.backbone.init_parameters(rng)
    bound = 1.0 / np.sqrt(model.d_model)
    model.dense_weight[...] = rng.uniform(-bound, bound, size=model.dense_weight.shape)
    model.dense_bias[...] = 0.0
    if model.projection is not None:
        model.projection[...] = rng.uniform(-bound, bound, size=model.projection.shape)
    LOGGER.debug("Initialized student parameters with seed %d", seed)


def build_student(
    feature_dim: int, d_model: int, mode: TargetMode, seed: int, tanh_scope: str = "psych", backbone: str = "synthetic"
) -> StudentModel:
    if backbone not in BACKBONES:
        raise ConfigError(f"Unknown backbone {backbone!r}; available: {', '.join(BACKBONES)}")
    model = StudentModel(backbone=BACKBONES[backbone](feature_dim, d_model), mode=mode, tanh_scope=tanh_scope)
    init_parameters(model, seed)
    return model
