"""Synthetic respiratory-like corpora for desk-scale experiments.

A recipe string describes what the active part of each clip contains:

``tonal:LO-HI``
    harmonic bursts whose fundamental is drawn uniformly from LO..HI Hz
``noise:LO-HI``
    white-noise bursts band-limited to LO..HI Hz
``pitch:CLASSES``
    harmonic bursts whose pitch class is drawn from a comma or ``+``
    separated list (``white``, ``black`` or names such as ``C+E+G``), with a
    random octave (3 to 5), detune of up to 20 cents and random
    timbre, so that only pitch content is informative

Every clip lasts 1 to 5 s and carries random low-level silence at both ends.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, write_wav
from .errors import ParameterError
from .vectorizer import LABELS

PITCH_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
PITCH_SETS = {"white": (0, 2, 4, 5, 7, 9, 11), "black": (1, 3, 6, 8, 10)}
SILENCE_LEVEL = 1e-5
PITCH_HARMONICS = 12
PITCH_DETUNE_CENTS = 20.0


@dataclass(frozen=True)
class Recipe:
    kind: str
    low: float = 0.0
    high: float = 0.0
    pitch_classes: tuple = ()

    @classmethod
    def parse(cls, text):
        kind, _, arg = text.strip().partition(":")
        if kind in ("tonal", "noise"):
            try:
                lo, hi = (float(v) for v in arg.split("-"))
            except ValueError:
                raise ParameterError(f"recipe {text!r}: expected {kind}:LO-HI") from None
            if not 0 < lo < hi:
                raise ParameterError(f"recipe {text!r}: need 0 < LO < HI")
            return cls(kind, lo, hi)
        if kind == "pitch":
            classes = []
            for tok in arg.replace("+", ",").split(","):
                tok = tok.strip()
                if tok in PITCH_SETS:
                    classes.extend(PITCH_SETS[tok])
                elif tok in PITCH_NAMES:
                    classes.append(PITCH_NAMES.index(tok))
                elif tok:
                    raise ParameterError(f"recipe {text!r}: unknown pitch class {tok!r}")
            if not classes:
                raise ParameterError(f"recipe {text!r}: no pitch classes")
            return cls(kind, pitch_classes=tuple(sorted(set(classes))))
        raise ParameterError(f"unknown recipe kind {kind!r}")

    def __str__(self):
        if self.kind == "pitch":
            return "pitch:" + "+".join(PITCH_NAMES[p] for p in self.pitch_classes)
        return f"{self.kind}:{self.low:g}-{self.high:g}"


@dataclass
class SynthSpec:
    n_per_class: int = 20
    recipes: dict = field(default_factory=lambda: {"covid": "tonal:200-400", "healthy": "noise:1000-4000"})
    seed: int = 0
    sample_rate_hz: int = 22050
    min_duration_s: float = 1.0
    max_duration_s: float = 5.0

    def __post_init__(self):
        if set(self.recipes) != set(LABELS):
            raise ParameterError(f"recipes must cover exactly {LABELS}")
        if self.n_per_class < 1:
            raise ParameterError("n_per_class must be >= 1")
        if not 0.5 <= self.min_duration_s <= self.max_duration_s:
            raise ParameterError("need 0.5 <= min_duration_s <= max_duration_s")
        for r in self.recipes.values():
            Recipe.parse(r)

    @classmethod
    def from_json(cls, path):
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _harmonic(rng, n, sr, f0, n_harmonics=4):
    t = np.arange(n) / sr
    out = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        if h * f0 >= 0.45 * sr:
            break
        out += rng.uniform(0.2, 1.0) / h * np.sin(2 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi))
    return out


def _band_noise(rng, n, sr, lo, hi):
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spec, n)


def _burst(rng, recipe, n, sr):
    if recipe.kind == "noise":
        x = _band_noise(rng, n, sr, recipe.low, min(recipe.high, 0.49 * sr))
    elif recipe.kind == "tonal":
        x = _harmonic(rng, n, sr, rng.uniform(recipe.low, recipe.high))
    else:
        pc = rng.choice(recipe.pitch_classes)
        octave = rng.integers(3, 6)
        cents = rng.uniform(-PITCH_DETUNE_CENTS, PITCH_DETUNE_CENTS)
        f0 = 440.0 * 2.0 ** ((pc - 9) / 12.0 + (octave - 4) + cents / 1200.0)
        # rich partials reach the region where mel bands are about a semitone wide
        x = _harmonic(rng, n, sr, f0, PITCH_HARMONICS)
        x += 10 ** (-25 / 20) * np.std(x) * rng.standard_normal(n)
    ramp = min(n // 4, int(0.02 * sr))
    env = np.ones(n)
    if ramp:
        env[:ramp] = np.linspace(0, 1, ramp)
        env[-ramp:] = np.linspace(1, 0, ramp)
    peak = np.max(np.abs(x)) or 1.0
    return x * env / peak * rng.uniform(0.3, 1.0)


def synth_clip(recipe, rng, sample_rate_hz=22050, min_duration_s=1.0, max_duration_s=5.0, source_id=""):
    """One clip: 1 to 3 bursts with short gaps, padded by random edge silence."""
    if isinstance(recipe, str):
        recipe = Recipe.parse(recipe)
    sr = sample_rate_hz
    total = int(rng.uniform(min_duration_s, max_duration_s) * sr)
    lead, tail = (int(rng.uniform(0.05, 0.25) * sr) for _ in range(2))
    body_len = total - lead - tail
    n_bursts = int(rng.integers(1, 4))
    gaps = [int(rng.uniform(0.03, 0.12) * sr) for _ in range(n_bursts - 1)]
    # bounded weights keep every burst at least ~1/7 of the active length
    share = rng.uniform(0.5, 1.5, n_bursts)
    usable = body_len - sum(gaps)
    edges = np.concatenate([[0], np.cumsum(share) / share.sum() * usable]).astype(int)
    parts = []
    for b in range(n_bursts):
        parts.append(_burst(rng, recipe, edges[b + 1] - edges[b], sr))
        if b < n_bursts - 1:
            parts.append(np.zeros(gaps[b]))
    body = np.concatenate(parts)
    x = np.concatenate([np.zeros(lead), body, np.zeros(tail)])
    x += SILENCE_LEVEL * rng.standard_normal(x.size)
    return AudioClip(np.clip(x, -1.0, 1.0), sr, source_id)


def generate_corpus(spec, out_dir):
    """Write breath and cough WAVs per participant plus ``manifest.csv``.

    Participants of the first label come first.  Each participant draws
    from its own seed stream, so adding participants leaves earlier clips
    unchanged.  Returns the manifest path.
    """
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    rows = []
    idx = 0
    for label in sorted(spec.recipes):
        recipe = Recipe.parse(spec.recipes[label])
        for _ in range(spec.n_per_class):
            pid = f"p{idx:04d}"
            rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), idx]))
            paths = []
            for kind in ("breath", "cough"):
                rel = f"audio/{pid}_{kind}.wav"
                clip = synth_clip(recipe, rng, spec.sample_rate_hz, spec.min_duration_s,
                                  spec.max_duration_s, source_id=rel)
                write_wav(out / rel, clip, bits=16)
                paths.append(rel)
            rows.append((pid, *paths, label))
            idx += 1
    manifest = out / "manifest.csv"
    with manifest.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("participant_id", "breath_path", "cough_path", "label"))
        w.writerows(rows)
    (out / "synth_spec.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return manifest
