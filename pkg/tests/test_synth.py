import csv

import numpy as np
import pytest

from respire.audio_io import read_wav, trim_silence
from respire.errors import ParameterError
from respire.synth import PITCH_SETS, Recipe, SynthSpec, generate_corpus, synth_clip
from respire.vectorizer import load_manifest


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    return out, generate_corpus(SynthSpec(n_per_class=20, seed=3), out)


def test_corpus_layout(corpus):
    out, manifest = corpus
    assert len(list((out / "audio").glob("*_breath.wav"))) == 40
    assert len(list((out / "audio").glob("*_cough.wav"))) == 40
    records = load_manifest(manifest)
    assert len(records) == 40
    assert sorted(r.label for r in records) == ["covid"] * 20 + ["healthy"] * 20
    assert (out / "synth_spec.json").exists()


def test_clips_survive_trim(corpus):
    out, _ = corpus
    for path in sorted((out / "audio").glob("*.wav"))[:12]:
        clip = read_wav(path)
        assert 1.0 <= clip.duration <= 5.0
        trimmed = trim_silence(clip)
        assert 0.3 * clip.duration < trimmed.duration < clip.duration


def test_deterministic_bytes(tmp_path):
    a = generate_corpus(SynthSpec(n_per_class=2, seed=5), tmp_path / "a").parent
    b = generate_corpus(SynthSpec(n_per_class=2, seed=5), tmp_path / "b").parent
    for f in sorted((a / "audio").iterdir()):
        assert f.read_bytes() == (b / "audio" / f.name).read_bytes()
    assert (a / "manifest.csv").read_bytes() == (b / "manifest.csv").read_bytes()


def test_seed_changes_audio(tmp_path):
    a = generate_corpus(SynthSpec(n_per_class=1, seed=1), tmp_path / "a").parent
    b = generate_corpus(SynthSpec(n_per_class=1, seed=2), tmp_path / "b").parent
    assert (a / "audio/p0000_cough.wav").read_bytes() != (b / "audio/p0000_cough.wav").read_bytes()


def test_manifest_header(corpus):
    _, manifest = corpus
    with open(manifest, newline="") as fh:
        assert next(csv.reader(fh)) == ["participant_id", "breath_path", "cough_path", "label"]


def test_recipe_parsing():
    assert Recipe.parse("tonal:200-400") == Recipe("tonal", 200.0, 400.0)
    assert Recipe.parse("pitch:white").pitch_classes == PITCH_SETS["white"]
    assert Recipe.parse("pitch:C+E+G").pitch_classes == (0, 4, 7)
    assert str(Recipe.parse("pitch:black")) == "pitch:C#+D#+F#+G#+A#"
    assert str(Recipe.parse("noise:1000-4000")) == "noise:1000-4000"


@pytest.mark.parametrize("text", ["tonal:400-200", "noise:abc", "pitch:H", "pitch:", "chirp:1-2", "tonal:0-10"])
def test_recipe_errors(text):
    with pytest.raises(ParameterError):
        Recipe.parse(text)


def test_spec_validation():
    with pytest.raises(ParameterError):
        SynthSpec(recipes={"covid": "tonal:200-400"})
    with pytest.raises(ParameterError):
        SynthSpec(n_per_class=0)
    with pytest.raises(ParameterError):
        SynthSpec(min_duration_s=3.0, max_duration_s=2.0)


@pytest.mark.parametrize("recipe", ["tonal:200-400", "noise:1000-4000", "pitch:black"])
def test_synth_clip_bounds(recipe):
    for seed in range(5):
        clip = synth_clip(recipe, np.random.default_rng(seed))
        assert 1.0 <= clip.duration <= 5.0
        assert np.max(np.abs(clip.samples)) <= 1.0
        # edges are near-silent
        assert np.max(np.abs(clip.samples[:1000])) < 1e-3
