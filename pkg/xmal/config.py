"""YAML run configuration shared by every command."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, get_type_hints

import yaml
from pydantic import TypeAdapter, ValidationError

from .data.synthetic import SyntheticSpec
from .errors import ConfigError, DataError
from .evaluation.evaluator import DEFAULT_LAMBDA_GRID, EvalConfig
from .features.targets import TargetKind, TargetMode
from .training.losses import LossKind
from .training.trainer import TrainConfig

LOGGER = logging.getLogger(__name__)


@dataclass
class PathsConfig:
    """Input artifacts default to the layout ``synth`` writes under ``data_dir``."""

    data_dir: str = "data"
    manifest: Optional[str] = None
    teacher: Optional[str] = None
    outcomes: Optional[str] = None
    lexicon: Optional[str] = None
    out_dir: str = "runs"

    def resolve(self, name: str) -> Path:
        defaults = {
            "manifest": "manifest.jsonl",
            "teacher": "teacher.xmal",
            "outcomes": "outcomes.csv",
            "lexicon": "lexicon.csv",
        }
        value = getattr(self, name)
        return Path(value) if value is not None else Path(self.data_dir) / defaults[name]


@dataclass
class ModelConfig:
    """Student settings; the width is taken from the teacher store."""

    tanh_scope: str = "psych"
    backbone: str = "synthetic"
    seed: Optional[int] = None


@dataclass
class TargetConfig:
    kind: str = "semantic"
    replace_count: int = 10
    replace_offset: int = 0

    def mode(self) -> TargetMode:
        try:
            kind = TargetKind(self.kind)
        except ValueError as exc:
            raise ConfigError(f"target.kind must be one of {[k.value for k in TargetKind]}") from exc
        return TargetMode(kind, self.replace_count, self.replace_offset)


@dataclass
class TrainSection:
    learning_rate: float = 1e-5
    weight_decay: float = 1e-2
    batch_size: int = 32
    epochs: int = 50
    temperature: float = 0.1
    loss: str = "nce"
    exclude_positive: bool = False
    optimizer: str = "sgd"
    momentum: float = 0.0
    split: List[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: Optional[int] = None


@dataclass
class EvalSection:
    folds: int = 10
    lambda_grid: List[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    baseline: Optional[str] = None
    second_baseline: Optional[str] = None
    include_teacher: bool = False
    include_psych_outcomes: bool = False
    seed: Optional[int] = None


@dataclass
class AnalysisSection:
    n_max: int = 3
    min_person_freq: int = 2
    top: int = 20
    alpha: Optional[float] = None
    outcome: Optional[str] = None
    normalize_overlap: bool = True
    render: bool = False


SECTIONS = {
    "paths": PathsConfig,
    "synth": SyntheticSpec,
    "model": ModelConfig,
    "target": TargetConfig,
    "train": TrainSection,
    "eval": EvalSection,
    "analysis": AnalysisSection,
}


def _coerce(name: str, cls: type, payload: Mapping[str, Any]) -> Dict[str, Any]:
    """Convert YAML values to each field's annotated type (``"1e-5"`` becomes a float)."""

    hints = get_type_hints(cls)
    values: Dict[str, Any] = {}
    for key, value in payload.items():
        try:
            values[key] = TypeAdapter(hints[key]).validate_python(value)
        except ValidationError as exc:
            problem = exc.errors()[0]["msg"]
            raise ConfigError(f"{name}.{key}: {problem} (got {value!r})") from exc
    return values


def _section(name: str, payload: Any) -> Any:
    cls = SECTIONS[name]
    if payload is None:
        payload = {}
    if not isinstance(payload, Mapping):
        raise ConfigError(f"Config section {name!r} must be a mapping")
    known = {item.name for item in fields(cls)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in section {name!r}: {', '.join(map(str, unknown))}")
    try:
        return cls(**_coerce(name, cls, payload))
    except TypeError as exc:
        raise ConfigError(f"Invalid values in section {name!r}: {exc}") from exc


@dataclass
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    synth_seed_set: bool = field(default=False, repr=False)

    @classmethod
    def from_mapping(cls, payload: Optional[Mapping[str, Any]]) -> "RunConfig":
        payload = dict(payload or {})
        unknown = sorted(set(payload) - set(SECTIONS) - {"seed"})
        if unknown:
            raise ConfigError(f"Unknown top-level config key(s): {', '.join(map(str, unknown))}")
        seed = payload.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed must be an integer")
        sections = {name: _section(name, payload.get(name)) for name in SECTIONS}
        synth_seed_set = isinstance(payload.get("synth"), Mapping) and "seed" in payload["synth"]
        config = cls(seed=seed, synth_seed_set=synth_seed_set, **sections)
        if not synth_seed_set:
            config.synth.seed = seed
        return config

    @classmethod
    def load(cls, path: Optional[Path]) -> "RunConfig":
        if path is None:
            return cls.from_mapping({})
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            payload = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
        if payload is not None and not isinstance(payload, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        LOGGER.debug("Loaded config from %s", path)
        return cls.from_mapping(payload)

    def override(self, seed: Optional[int] = None, out_dir: Optional[Path] = None) -> "RunConfig":
        """Apply ``--seed`` / ``--out``; a new seed reaches every section without its own."""

        if seed is not None:
            self.seed = seed
            if not self.synth_seed_set:
                self.synth.seed = seed
        if out_dir is not None:
            self.paths.out_dir = str(out_dir)
        return self

    @property
    def out_dir(self) -> Path:
        return Path(self.paths.out_dir)

    def section_seed(self, section: Any) -> int:
        return self.seed if section.seed is None else section.seed

    def target_mode(self) -> TargetMode:
        return self.target.mode()

    def train_config(self) -> TrainConfig:
        section = self.train
        try:
            loss_kind = LossKind(section.loss)
        except ValueError as exc:
            raise ConfigError(f"train.loss must be one of {[k.value for k in LossKind]}") from exc
        return TrainConfig(
            learning_rate=section.learning_rate,
            weight_decay=section.weight_decay,
            batch_size=section.batch_size,
            epochs=section.epochs,
            temperature=section.temperature,
            loss_kind=loss_kind,
            exclude_positive=section.exclude_positive,
            mode=self.target_mode(),
            optimizer=section.optimizer,
            momentum=section.momentum,
            seed=self.section_seed(section),
        )

    def split_ratios(self) -> Tuple[float, float, float]:
        ratios = tuple(float(value) for value in self.train.split)
        if len(ratios) != 3:
            raise ConfigError("train.split needs three ratios (train, val, test)")
        return ratios  # type: ignore[return-value]

    def eval_config(self, baseline: Optional[str] = None) -> EvalConfig:
        section = self.eval
        if section.folds < 2:
            raise ConfigError("eval.folds must be at least 2")
        if not section.lambda_grid or any(value <= 0 for value in section.lambda_grid):
            raise ConfigError("eval.lambda_grid must hold positive values")
        return EvalConfig(
            folds=section.folds,
            lambda_grid=tuple(float(value) for value in section.lambda_grid),
            seed=self.section_seed(section),
            baseline=baseline if baseline is not None else section.baseline,
            second_baseline=section.second_baseline,
        )

    def require_paths(self, *names: str) -> Dict[str, Path]:
        """Resolve named inputs and fail fast when any is missing."""

        resolved = {name: self.paths.resolve(name) for name in names}
        for name, path in resolved.items():
            if not path.exists():
                raise DataError(f"Missing {name} input: {path}")
        return resolved
