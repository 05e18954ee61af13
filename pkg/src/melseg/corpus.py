"""Monophonic melody corpora with phrase annotations.

Melodies are stored as small CSV files (one note per row, times in
sixteenth-note ticks). A corpus is either a directory of such files or a
manifest listing them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    EmptyCorpus,
    EmptyMelody,
    FirstNoteNotPhraseStart,
    InvalidNote,
    MalformedHeader,
    NonIntegerField,
    NonMonotoneOnset,
    OverlappingNotes,
)

HEADER = "onset_16th,duration_16th,midi_pitch,phrase_start"


@dataclass(frozen=True)
class NoteEvent:
    onset: int
    duration: int
    pitch: int
    phrase_start: bool = False

    def __post_init__(self):
        if self.onset < 0:
            raise InvalidNote(f"onset must be >= 0, got {self.onset}")
        if self.duration < 1:
            raise InvalidNote(f"duration must be >= 1, got {self.duration}")
        if not 0 <= self.pitch <= 127:
            raise InvalidNote(f"pitch must be in [0, 127], got {self.pitch}")

    @property
    def offset(self) -> int:
        return self.onset + self.duration


@dataclass(frozen=True)
class Melody:
    id: str
    notes: tuple[NoteEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        validate_notes(self.notes)

    def __len__(self) -> int:
        return len(self.notes)

    @property
    def phrase_starts(self) -> np.ndarray:
        return np.array([n.phrase_start for n in self.notes], dtype=np.int8)

    def rests(self) -> np.ndarray:
        """Gap in ticks between the previous note's offset and each onset (0 for note 0)."""
        gaps = np.zeros(len(self.notes), dtype=np.int64)
        for i in range(1, len(self.notes)):
            gaps[i] = self.notes[i].onset - self.notes[i - 1].offset
        return gaps


@dataclass
class Corpus:
    melodies: list[Melody]
    source: str | None = None
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.melodies:
            raise EmptyCorpus("corpus contains no melodies")
        seen = set()
        for m in self.melodies:
            if m.id in seen:
                raise DuplicateId(f"duplicate melody id {m.id!r}")
            seen.add(m.id)
        self._index = {m.id: m for m in self.melodies}

    def __len__(self) -> int:
        return len(self.melodies)

    def __iter__(self):
        return iter(self.melodies)

    def __getitem__(self, melody_id: str) -> Melody:
        return self._index[melody_id]

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.melodies]

    def subset(self, ids) -> "Corpus":
        wanted = set(ids)
        return Corpus([m for m in self.melodies if m.id in wanted], self.source)

    @property
    def n_notes(self) -> int:
        return sum(len(m) for m in self.melodies)


def validate_notes(notes) -> None:
    if not notes:
        raise EmptyMelody("melody has no notes")
    if not notes[0].phrase_start:
        raise FirstNoteNotPhraseStart("first note must start a phrase")
    for i in range(1, len(notes)):
        prev, cur = notes[i - 1], notes[i]
        if cur.onset <= prev.onset:
            raise NonMonotoneOnset(
                f"note {i}: onset {cur.onset} not after previous onset {prev.onset}")
        if cur.onset < prev.offset:
            raise OverlappingNotes(
                f"note {i}: onset {cur.onset} overlaps previous note ending at {prev.offset}")


def _int_field(value: str, lineno: int, name: str) -> int:
    # int() accepts "+3", " 3" and "3_0"; the format only allows plain decimals
    v = value[1:] if value.startswith("-") else value
    if not v or not v.isascii() or not v.isdigit():
        raise NonIntegerField(f"line {lineno}: field {name!r} is not an integer: {value!r}")
    return int(value)


def parse_melody(text: str, melody_id: str) -> Melody:
    """Parse a melody CSV document.

    Args:
        text: full document contents.
        melody_id: id given to the resulting melody.

    Returns:
        The validated Melody.

    Raises:
        MalformedHeader, NonIntegerField, NonMonotoneOnset, OverlappingNotes,
        EmptyMelody, FirstNoteNotPhraseStart.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != HEADER:
        got = lines[0] if lines else ""
        raise MalformedHeader(f"line 1: expected header {HEADER!r}, got {got!r}")
    names = HEADER.split(",")
    notes = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise NonIntegerField(f"line {lineno}: expected 4 fields, got {len(parts)}")
        onset, dur, pitch, start = (_int_field(p, lineno, n) for p, n in zip(parts, names))
        if start not in (0, 1):
            raise NonIntegerField(f"line {lineno}: phrase_start must be 0 or 1, got {start}")
        try:
            notes.append(NoteEvent(onset, dur, pitch, bool(start)))
        except InvalidNote as exc:
            raise InvalidNote(f"line {lineno}: {exc}") from None
    return Melody(melody_id, tuple(notes))


def serialize_melody(melody: Melody) -> str:
    rows = [HEADER]
    rows.extend(f"{n.onset},{n.duration},{n.pitch},{int(n.phrase_start)}" for n in melody.notes)
    return "\n".join(rows) + "\n"


def read_melody(path) -> Melody:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    try:
        return parse_melody(text, path.stem)
    except (MalformedHeader, NonIntegerField, NonMonotoneOnset, OverlappingNotes,
            EmptyMelody, FirstNoteNotPhraseStart, InvalidNote) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _manifest_paths(manifest: Path) -> list[Path]:
    paths = []
    with open(manifest, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                p = Path(line)
                paths.append(p if p.is_absolute() else manifest.parent / p)
    return paths


def load_corpus(manifest) -> Corpus:
    """Load a corpus from a directory of CSV files or a manifest file.

    Directory entries are sorted by filename; manifest entries keep their
    listed order. Relative manifest paths resolve against the manifest's
    directory.
    """
    manifest = Path(manifest)
    if manifest.is_dir():
        paths = sorted(manifest.glob("*.csv"), key=lambda p: p.name)
    else:
        paths = _manifest_paths(manifest)
    if not paths:
        raise EmptyCorpus(f"{manifest}: no melody files found")
    melodies = []
    seen = {}
    for p in paths:
        m = read_melody(p)
        if m.id in seen:
            raise DuplicateId(f"{p}: melody id {m.id!r} already loaded from {seen[m.id]}")
        seen[m.id] = p
        melodies.append(m)
    return Corpus(melodies, str(manifest))


def write_corpus(corpus: Corpus, out_dir) -> list[Path]:
    """Write one CSV per melody plus a ``manifest.txt`` listing them in order."""
    from .io import atomic_write_text

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for m in corpus:
        p = out_dir / f"{m.id}.csv"
        atomic_write_text(p, serialize_melody(m))
        written.append(p)
    atomic_write_text(out_dir / "manifest.txt",
                      "".join(f"{p.name}\n" for p in written))
    return written


def boundary_vector(melody: Melody) -> np.ndarray:
    """Ground-truth boundary indicator: phrase starts, note 0 masked, last note forced."""
    b = melody.phrase_starts.copy()
    b[0] = 0
    b[-1] = 1
    return b


def boundary_density(corpus: Corpus) -> float:
    """Fraction of notes flagged as phrase starts (before final-boundary forcing)."""
    flags = np.concatenate([m.phrase_starts for m in corpus])
    return float(flags.mean())


def force_final(b) -> np.ndarray:
    """Apply the evaluation convention to a predicted vector: note 0 off, last note on."""
    b = np.asarray(b, dtype=np.int8).copy()
    if len(b) > 1:
        b[0] = 0
    b[-1] = 1
    return b


__all__ = [
    "HEADER", "NoteEvent", "Melody", "Corpus", "parse_melody", "serialize_melody",
    "read_melody", "load_corpus", "write_corpus", "boundary_vector",
    "boundary_density", "force_final",
]
