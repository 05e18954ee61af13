"""Synthetic phrase-annotated melodies with planted boundary cues.

Phrases are stepwise pitch walks; each new phrase is introduced either by a
rest or by a large leap. Used as a stand-in corpus when no annotated folk
song data is available.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .corpus import Corpus, Melody, NoteEvent
from .errors import InvalidSpec
from .rng import keyed_rng

REST = "rest"
LEAP = "leap"


@dataclass(frozen=True)
class SynthSpec:
    melodies: int = 200
    phrases_min: int = 4
    phrases_max: int = 8
    phrase_len_min: int = 5
    phrase_len_max: int = 12
    max_step: int = 2
    rest_fraction: float = 0.6
    rest_min: int = 2
    rest_max: int = 6
    leap_min: int = 7
    leap_max: int = 12
    pitch_min: int = 55
    pitch_max: int = 80
    durations: tuple = (2, 2, 4)

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(int(d) for d in self.durations))
        checks = [
            (self.melodies >= 1, "melodies must be >= 1"),
            (1 <= self.phrases_min <= self.phrases_max, "phrase count range is empty"),
            (1 <= self.phrase_len_min <= self.phrase_len_max, "phrase length range is empty"),
            (self.max_step >= 0, "max_step must be >= 0"),
            (0.0 <= self.rest_fraction <= 1.0, "rest_fraction must be in [0, 1]"),
            (1 <= self.rest_min <= self.rest_max, "rest range is empty"),
            (1 <= self.leap_min <= self.leap_max, "leap range is empty"),
            (0 <= self.pitch_min and self.pitch_max <= 127, "pitch range outside MIDI"),
            (self.pitch_max - self.pitch_min >= self.leap_min, "pitch range narrower than a leap"),
            (len(self.durations) > 0 and min(self.durations) >= 1, "durations must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidSpec(msg)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InvalidSpec(f"unknown synth spec keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    @classmethod
    def load(cls, path) -> "SynthSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["durations"] = list(self.durations)
        return d


def _step(rng, pitch: int, spec: SynthSpec) -> int:
    step = int(rng.integers(-spec.max_step, spec.max_step + 1))
    nxt = pitch + step
    if nxt < spec.pitch_min or nxt > spec.pitch_max:
        nxt = pitch - step
    return nxt


def _leap(rng, pitch: int, spec: SynthSpec) -> int:
    size = int(rng.integers(spec.leap_min, spec.leap_max + 1))
    options = [p for p in (pitch + size, pitch - size) if spec.pitch_min <= p <= spec.pitch_max]
    if not options:
        # shrink toward the largest leap that fits
        up, down = spec.pitch_max - pitch, pitch - spec.pitch_min
        return spec.pitch_max if up >= down else spec.pitch_min
    return options[int(rng.integers(len(options)))]


def generate_melody(spec: SynthSpec, seed: int, index: int):
    """One melody plus the cue (``rest`` or ``leap``) planted before each phrase start."""
    rng = keyed_rng(seed, "synth", index)
    n_phrases = int(rng.integers(spec.phrases_min, spec.phrases_max + 1))
    pitch = int(rng.integers(spec.pitch_min, spec.pitch_max + 1))
    onset = 0
    notes = []
    cues = {}
    for ph in range(n_phrases):
        length = int(rng.integers(spec.phrase_len_min, spec.phrase_len_max + 1))
        for j in range(length):
            if j == 0 and ph > 0:
                if rng.random() < spec.rest_fraction:
                    onset += int(rng.integers(spec.rest_min, spec.rest_max + 1))
                    pitch = _step(rng, pitch, spec)
                    cues[len(notes)] = REST
                else:
                    pitch = _leap(rng, pitch, spec)
                    cues[len(notes)] = LEAP
            elif notes:
                pitch = _step(rng, pitch, spec)
            dur = spec.durations[int(rng.integers(len(spec.durations)))]
            notes.append(NoteEvent(onset, dur, pitch, j == 0))
            onset += dur
    return Melody(f"syn{index:05d}", tuple(notes)), cues


def generate_synthetic_corpus(spec: SynthSpec = SynthSpec(), seed: int = 0) -> Corpus:
    """Deterministic synthetic corpus; melody ``i`` depends only on ``(seed, i)``."""
    return Corpus([generate_melody(spec, seed, i)[0] for i in range(spec.melodies)],
                  source=f"synthetic:seed={seed}")


def planted_cues(spec: SynthSpec, seed: int) -> dict[str, dict[int, str]]:
    """Melody id -> {note index: cue} for every planted phrase start after the first."""
    out = {}
    for i in range(spec.melodies):
        m, cues = generate_melody(spec, seed, i)
        out[m.id] = cues
    return out
