from pathlib import Path

import numpy as np
import pytest

from xmal.data.records import load_all_features, load_manifest, load_outcomes
from xmal.data.store import read_store
from xmal.data.synthetic import (
    OUTCOME_NAME,
    PSYCH_VOCABULARY,
    SyntheticCorpusGenerator,
    SyntheticSpec,
)
from xmal.errors import ConfigError
from xmal.features.psych import extract_psych_matrix, load_lexicon


def _small_spec(**overrides) -> SyntheticSpec:
    values = dict(persons=2, segments_per_person=3, latent_dim=4, teacher_dim=8, feature_dim=5, frames=4, seed=7)
    values.update(overrides)
    return SyntheticSpec(**values)


def test_generate_small_corpus_shapes() -> None:
    corpus = SyntheticCorpusGenerator(_small_spec()).generate()

    assert len(corpus.records) == 6
    assert len(corpus.persons) == 2
    assert corpus.segment_ids[:2] == ["p0000_s00", "p0000_s01"]
    assert corpus.teacher.shape == (6, 8)
    np.testing.assert_allclose(np.linalg.norm(corpus.teacher, axis=1), 1.0, atol=1e-12)
    assert corpus.records[0].acoustic_features.shape == (4, 5)
    assert corpus.records[0].duration_s == pytest.approx(1.0)


def test_export_layout_round_trips(tmp_path: Path) -> None:
    generator = SyntheticCorpusGenerator(_small_spec())
    paths = generator.export(generator.generate(), tmp_path)

    records = load_manifest(paths["manifest"])
    assert len(records) == 6
    features = load_all_features(records, tmp_path)
    assert all(matrix.shape == (4, 5) for matrix in features)

    outcomes = load_outcomes(paths["outcomes"])
    assert sorted(outcomes) == ["p0000", "p0001"]
    assert list(outcomes["p0000"].outcome_scores) == [OUTCOME_NAME]

    teacher = read_store(paths["teacher"])
    assert teacher.ids == [record.segment_id for record in records]
    assert load_lexicon(paths["lexicon"]).weights.keys() == PSYCH_VOCABULARY.keys()


def test_same_seed_gives_identical_files(tmp_path: Path) -> None:
    roots = [tmp_path / "first", tmp_path / "second"]
    for root in roots:
        generator = SyntheticCorpusGenerator(_small_spec())
        generator.export(generator.generate(), root)

    files = sorted(path.relative_to(roots[0]) for path in roots[0].rglob("*") if path.is_file())
    assert files
    for relative in files:
        assert (roots[0] / relative).read_bytes() == (roots[1] / relative).read_bytes(), relative


def test_different_seed_changes_corpus() -> None:
    first = SyntheticCorpusGenerator(_small_spec(seed=1)).generate()
    second = SyntheticCorpusGenerator(_small_spec(seed=2)).generate()
    assert not np.array_equal(first.teacher, second.teacher)


def test_noise_free_corpus_follows_latents() -> None:
    weights = [1.0, 0.0, 0.0, 0.0]
    corpus = SyntheticCorpusGenerator(_small_spec(noise_std=0.0, outcome_weights=weights)).generate()

    frames = corpus.records[0].acoustic_features
    np.testing.assert_array_equal(frames, np.tile(frames[0], (frames.shape[0], 1)))
    expected = corpus.latents[:3, 0].mean()
    assert corpus.persons[0].outcome_scores[OUTCOME_NAME] == pytest.approx(expected, abs=1e-12)


def test_transcripts_carry_lexicon_signal() -> None:
    corpus = SyntheticCorpusGenerator(_small_spec(persons=10, words_per_segment=20)).generate()
    texts = [record.text for record in corpus.records]

    assert all(len(text.split()) == 20 for text in texts)
    psych = extract_psych_matrix(texts, corpus.lexicon)
    assert np.count_nonzero(psych) > 0
    assert psych.std(axis=0).min() > 0


def test_nuisance_is_off_by_default() -> None:
    assert SyntheticSpec().nuisance_std == 0.0


@pytest.mark.parametrize("scope, shared", [("person", True), ("segment", False)])
def test_nuisance_shifts_frames_but_not_teacher(scope: str, shared: bool) -> None:
    plain = SyntheticCorpusGenerator(_small_spec(noise_std=0.0, nuisance_scope=scope)).generate()
    shifted = SyntheticCorpusGenerator(_small_spec(noise_std=0.0, nuisance_std=2.0, nuisance_scope=scope)).generate()

    np.testing.assert_array_equal(plain.latents, shifted.latents)
    np.testing.assert_array_equal(plain.teacher, shifted.teacher)
    offsets = [
        shifted.records[index].acoustic_features[0] - plain.records[index].acoustic_features[0] for index in range(3)
    ]
    assert np.abs(offsets[0]).max() > 0
    assert np.allclose(offsets[0], offsets[1]) is shared
    assert np.allclose(offsets[0], offsets[2]) is shared


def test_spec_validation() -> None:
    with pytest.raises(ConfigError):
        SyntheticSpec(persons=0)
    with pytest.raises(ConfigError):
        SyntheticSpec(noise_std=-1.0)
    with pytest.raises(ConfigError, match="nuisance_scope"):
        SyntheticSpec(nuisance_scope="frame")
    with pytest.raises(ConfigError, match="outcome_weights"):
        SyntheticSpec(latent_dim=3, outcome_weights=[1.0])
