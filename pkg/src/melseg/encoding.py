"""Binary n-gram encoding of melodies with four one-hot viewpoints per note.

Each note becomes a 41-bit column made of four one-hot blocks:
|interval| (13 bins), contour (3), inter-onset interval in sixteenths (16)
and the rest before the note in eighths (9). An n-gram instance for target
note t concatenates the columns of notes t-n+1..t; positions before the
start of the melody are filled with random bits.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Corpus, Melody, NoteEvent
from .rng import keyed_rng

DOWN, EQUAL, UP = 0, 1, 2


@dataclass(frozen=True)
class ViewpointConfig:
    abs_interval_bins: int = 13
    contour_bins: int = 3
    ioi_bins: int = 16
    ooi_bins: int = 9

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        if self.contour_bins != 3:
            raise ValueError("contour has exactly three states (down/equal/up)")

    @property
    def note_width(self) -> int:
        return self.abs_interval_bins + self.contour_bins + self.ioi_bins + self.ooi_bins

    @property
    def block_offsets(self) -> tuple[int, int, int, int]:
        a = self.abs_interval_bins
        c = a + self.contour_bins
        i = c + self.ioi_bins
        return (0, a, c, i)

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_VIEWPOINTS = ViewpointConfig()


def note_bins(prev: NoteEvent | None, cur: NoteEvent,
              cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> tuple[int, int, int, int]:
    """Bin indices (|interval|, contour, IOI, OOI) for ``cur`` given its predecessor.

    The IOI value v in sixteenths occupies bin v-1; the OOI value in eighths
    occupies bin v directly.
    """
    if prev is None:
        return (0, EQUAL, 0, 0)
    step = cur.pitch - prev.pitch
    interval = min(abs(step), cfg.abs_interval_bins - 1)
    contour = UP if step > 0 else DOWN if step < 0 else EQUAL
    ioi = min(max(cur.onset - prev.onset, 1), cfg.ioi_bins)
    gap = min(max(cur.onset - prev.offset, 0), 16)
    ooi = min(gap // 2, cfg.ooi_bins - 1)
    return (interval, contour, ioi - 1, ooi)


def melody_bins(melody: Melody, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> np.ndarray:
    """(T, 4) integer array of per-note viewpoint bins."""
    out = np.empty((len(melody), 4), dtype=np.int64)
    prev = None
    for t, note in enumerate(melody.notes):
        out[t] = note_bins(prev, note, cfg)
        prev = note
    return out


def bins_to_columns(bins: np.ndarray, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> np.ndarray:
    bins = np.atleast_2d(bins)
    cols = np.zeros((len(bins), cfg.note_width), dtype=np.uint8)
    rows = np.arange(len(bins))
    for block, off in enumerate(cfg.block_offsets):
        cols[rows, off + bins[:, block]] = 1
    return cols


def encode_note(prev: NoteEvent | None, cur: NoteEvent,
                cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> np.ndarray:
    """41-bit (by default) one-hot column for a single note."""
    return bins_to_columns(np.array([note_bins(prev, cur, cfg)]), cfg)[0]


@dataclass
class NGramBatch:
    n: int
    rows: np.ndarray            # (N, n * note_width) uint8
    melody_ids: list[str]       # per row
    note_index: np.ndarray      # per row
    padded: np.ndarray          # per row bool
    note_width: int = DEFAULT_VIEWPOINTS.note_width

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def row_meta(self) -> list[tuple[str, int]]:
        return list(zip(self.melody_ids, self.note_index.tolist()))

    def rows_for(self, melody_id: str) -> np.ndarray:
        mask = np.array([m == melody_id for m in self.melody_ids], dtype=bool)
        return self.rows[mask]

    def melody_slices(self) -> dict[str, slice]:
        """Contiguous row range per melody (rows are always grouped by melody)."""
        out = {}
        start = 0
        ids = self.melody_ids
        for i in range(1, len(ids) + 1):
            if i == len(ids) or ids[i] != ids[start]:
                out[ids[start]] = slice(start, i)
                start = i
        return out

    def to_pbm(self) -> str:
        """Plain PBM (P1) rendering, one image row per instance."""
        h, w = self.rows.shape
        body = "\n".join(" ".join(map(str, r)) for r in self.rows.tolist())
        return f"P1\n# n={self.n} note_width={self.note_width}\n{w} {h}\n{body}\n"


def _noise_column(seed: int, melody_id: str, t: int, position: int, width: int) -> np.ndarray:
    rng = keyed_rng(seed, "pad", melody_id, t, position)
    return rng.integers(0, 2, size=width, dtype=np.uint8)


def encode_melody(melody: Melody, n: int, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS,
                  rng_seed: int = 0) -> NGramBatch:
    """Sliding-window n-gram instances, one per target note.

    Context positions before the melody start get i.i.d. fair-coin bits from
    a stream keyed by ``(rng_seed, melody.id, t, position)``, where position
    counts window slots from 0 (oldest) to n-1 (target).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    w = cfg.note_width
    cols = bins_to_columns(melody_bins(melody, cfg), cfg)
    T = len(melody)
    rows = np.empty((T, n * w), dtype=np.uint8)
    padded = np.zeros(T, dtype=bool)
    for t in range(T):
        for pos in range(n):
            src = t - n + 1 + pos
            if src >= 0:
                rows[t, pos * w:(pos + 1) * w] = cols[src]
            else:
                rows[t, pos * w:(pos + 1) * w] = _noise_column(rng_seed, melody.id, t, pos, w)
                padded[t] = True
    return NGramBatch(n, rows, [melody.id] * T, np.arange(T), padded, w)


def encode_corpus(corpus: Corpus, n: int, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS,
                  rng_seed: int = 0) -> NGramBatch:
    batches = [encode_melody(m, n, cfg, rng_seed) for m in corpus]
    return concat_batches(batches)


def concat_batches(batches) -> NGramBatch:
    batches = list(batches)
    if not batches:
        raise ValueError("nothing to concatenate")
    n, w = batches[0].n, batches[0].note_width
    ids: list[str] = []
    for b in batches:
        if b.n != n or b.note_width != w:
            raise ValueError("batches disagree on n or note width")
        ids.extend(b.melody_ids)
    return NGramBatch(
        n,
        np.concatenate([b.rows for b in batches]),
        ids,
        np.concatenate([b.note_index for b in batches]),
        np.concatenate([b.padded for b in batches]),
        w,
    )
