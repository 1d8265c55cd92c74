"""Synthetic paired audio/text corpus.

Every segment draws a content latent ``z``. The text teacher sees a noisy linear
image of ``z``; the acoustic frames see a different linear image of ``z`` plus an
optional nuisance latent (speaker or channel) that the teacher never sees;
the transcript mixes filler words with psych-lexicon words whose odds depend on
``z``; and each person's outcome is a linear function of their mean latent.
With ``nuisance_std > 0`` alignment has to teach the student to keep ``z`` and
drop the nuisance, which is what shows up downstream. The nuisance is off by
default.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from faker import Faker

from ..errors import ConfigError, DataError
from ..features.psych import PSYCH_DIMENSIONS, Lexicon, write_lexicon
from .records import PersonRecord, SegmentRecord, write_manifest, write_outcomes
from .store import EmbeddingStore, write_store

LOGGER = logging.getLogger(__name__)

FRAME_SECONDS = 0.25
OUTCOME_NAME = "latent_score"
NUISANCE_SCOPES = ("person", "segment")

PSYCH_VOCABULARY = {
    "VAL": ["happy", "great", "love", "wonderful", "terrible", "awful"],
    "ARO": ["excited", "shouting", "rushing", "calm", "sleepy", "quiet"],
    "OPE": ["curious", "imagine", "art", "ideas", "routine", "familiar"],
    "CON": ["plan", "organized", "careful", "schedule", "messy", "forgot"],
    "EXT": ["party", "friends", "talking", "crowd", "alone", "home"],
    "AGR": ["thanks", "kind", "helping", "together", "argue", "blame"],
    "NEU": ["worried", "nervous", "upset", "stressed", "relaxed", "steady"],
    "ANG": ["angry", "furious", "hate", "annoyed", "mad", "fight"],
    "ANX": ["panic", "afraid", "scared", "tense", "uneasy", "dread"],
    "DEP": ["sad", "tired", "hopeless", "empty", "lonely", "crying"],
}


@dataclass
class SyntheticSpec:
    latent_dim: int = 8
    teacher_dim: int = 32
    feature_dim: int = 16
    frames: int = 10
    persons: int = 200
    segments_per_person: int = 5
    noise_std: float = 0.1
    outcome_weights: Optional[List[float]] = None
    seed: int = 0
    nuisance_dim: int = 4
    nuisance_std: float = 0.0
    nuisance_scope: str = "person"
    words_per_segment: int = 12

    def __post_init__(self) -> None:
        for name in ("latent_dim", "teacher_dim", "feature_dim", "frames", "persons", "segments_per_person"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synth.{name} must be at least 1")
        if self.noise_std < 0 or self.nuisance_std < 0 or self.nuisance_dim < 0:
            raise ConfigError("synth noise and nuisance settings must be nonnegative")
        if self.nuisance_scope not in NUISANCE_SCOPES:
            raise ConfigError(f"synth.nuisance_scope must be one of {NUISANCE_SCOPES}, got {self.nuisance_scope!r}")
        if self.words_per_segment < 2:
            raise ConfigError("synth.words_per_segment must be at least 2")
        if self.outcome_weights is not None and len(self.outcome_weights) != self.latent_dim:
            raise ConfigError(f"synth.outcome_weights needs {self.latent_dim} values")


@dataclass
class SyntheticCorpus:
    spec: SyntheticSpec
    records: List[SegmentRecord]
    persons: List[PersonRecord]
    lexicon: Lexicon
    latents: np.ndarray = field(repr=False)
    teacher: np.ndarray = field(repr=False)

    @property
    def segment_ids(self) -> List[str]:
        return [record.segment_id for record in self.records]


def synthetic_lexicon(rng: np.random.Generator) -> Lexicon:
    """Each vocabulary word loads on its own dimension; the last two words negatively."""

    weights: Dict[str, Dict[str, float]] = {}
    for dimension in PSYCH_DIMENSIONS:
        words = PSYCH_VOCABULARY[dimension]
        magnitudes = rng.uniform(0.5, 2.0, size=len(words))
        signs = np.where(np.arange(len(words)) < len(words) - 2, 1.0, -1.0)
        weights[dimension] = {word: float(round(m * s, 4)) for word, m, s in zip(words, magnitudes, signs)}
    return Lexicon(weights=weights, intercepts={dimension: 0.0 for dimension in PSYCH_DIMENSIONS})


class SyntheticCorpusGenerator:
    """Seeded generator for manifests, feature stores, teacher embeddings, and outcomes."""

    def __init__(self, spec: SyntheticSpec, locale: str = "en_US") -> None:
        self.spec = spec
        self.fake = Faker(locale)
        self.fake.seed_instance(spec.seed)
        self.rng = np.random.default_rng(spec.seed)

    def generate(self) -> SyntheticCorpus:
        spec = self.spec
        rng = self.rng
        teacher_map = rng.normal(0.0, 1.0 / np.sqrt(spec.latent_dim), (spec.teacher_dim, spec.latent_dim))
        acoustic_map = rng.normal(0.0, 1.0 / np.sqrt(spec.latent_dim), (spec.feature_dim, spec.latent_dim))
        nuisance_map = rng.normal(0.0, 1.0 / np.sqrt(max(spec.nuisance_dim, 1)), (spec.feature_dim, spec.nuisance_dim))
        if spec.outcome_weights is None:
            outcome_weights = rng.normal(size=spec.latent_dim)
        else:
            outcome_weights = np.asarray(spec.outcome_weights, dtype=np.float64)
        lexicon = synthetic_lexicon(rng)
        vocabulary = [word for dimension in PSYCH_DIMENSIONS for word in PSYCH_VOCABULARY[dimension]]
        word_loadings = rng.normal(size=(len(vocabulary), spec.latent_dim))

        records: List[SegmentRecord] = []
        persons: List[PersonRecord] = []
        latents = np.zeros((spec.persons * spec.segments_per_person, spec.latent_dim))
        teacher = np.zeros((len(latents), spec.teacher_dim))
        row = 0
        for person_index in range(spec.persons):
            person_id = f"p{person_index:04d}"
            start = row
            nuisance = rng.standard_normal(spec.nuisance_dim) * spec.nuisance_std
            for segment_index in range(spec.segments_per_person):
                z = rng.standard_normal(spec.latent_dim)
                if spec.nuisance_scope == "segment":
                    nuisance = rng.standard_normal(spec.nuisance_dim) * spec.nuisance_std

                embedding = teacher_map @ z + spec.noise_std * rng.standard_normal(spec.teacher_dim)
                norm = np.linalg.norm(embedding)
                if norm == 0:
                    raise DataError(f"Degenerate teacher embedding for segment {segment_index} of {person_id}")
                frame_mean = acoustic_map @ z + nuisance_map @ nuisance
                frames = frame_mean[None, :] + spec.noise_std * rng.standard_normal((spec.frames, spec.feature_dim))

                record = SegmentRecord(
                    segment_id=f"{person_id}_s{segment_index:02d}",
                    person_id=person_id,
                    text=self._transcript(z, vocabulary, word_loadings),
                    features_path=f"features/{person_id}_s{segment_index:02d}.xmal",
                    duration_s=spec.frames * FRAME_SECONDS,
                    acoustic_features=frames,
                    teacher_embedding=embedding / norm,
                )
                records.append(record)
                latents[row] = z
                teacher[row] = record.teacher_embedding
                row += 1

            score = float(outcome_weights @ latents[start:row].mean(axis=0) + spec.noise_std * rng.standard_normal())
            persons.append(PersonRecord(person_id, {OUTCOME_NAME: score}))

        LOGGER.info("Generated %d segments for %d persons", len(records), len(persons))
        return SyntheticCorpus(spec, records, persons, lexicon, latents, teacher)

    def _transcript(self, z: np.ndarray, vocabulary: List[str], word_loadings: np.ndarray) -> str:
        n_topic = self.spec.words_per_segment // 2
        logits = word_loadings @ z
        probabilities = np.exp(logits - logits.max())
        probabilities /= probabilities.sum()
        topic = [vocabulary[index] for index in self.rng.choice(len(vocabulary), size=n_topic, p=probabilities)]
        filler = self.fake.words(nb=self.spec.words_per_segment - n_topic)
        words = topic + filler
        order = self.rng.permutation(len(words))
        return " ".join(words[index] for index in order)

    @staticmethod
    def export(corpus: SyntheticCorpus, output_root: Path) -> Dict[str, Path]:
        """Write the corpus under ``output_root`` and return the artifact paths."""

        output_root = Path(output_root)
        try:
            output_root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"Cannot create output directory {output_root}: {exc}") from exc

        for record in corpus.records:
            frames = record.acoustic_features
            ids = [str(index) for index in range(frames.shape[0])]
            write_store(EmbeddingStore(ids=ids, matrix=frames), output_root / record.features_path)

        paths = {
            "manifest": output_root / "manifest.jsonl",
            "teacher": output_root / "teacher.xmal",
            "outcomes": output_root / "outcomes.csv",
            "lexicon": output_root / "lexicon.csv",
        }
        write_manifest(corpus.records, paths["manifest"])
        write_store(EmbeddingStore(ids=corpus.segment_ids, matrix=corpus.teacher), paths["teacher"])
        write_outcomes(corpus.persons, paths["outcomes"])
        write_lexicon(corpus.lexicon, paths["lexicon"])
        LOGGER.info("Saved synthetic corpus to %s", output_root)
        return paths
