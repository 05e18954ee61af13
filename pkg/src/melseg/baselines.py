"""Reference segmenters: Always, Never, rest rule (GPR 2a) and digram TP / PMI."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Melody, force_final
from .encoding import DEFAULT_VIEWPOINTS, ViewpointConfig, melody_bins
from .errors import EmptyTrainingSet
from .infocontent import Bsp

TP = "tp"
PMI = "pmi"

# Published scores for models that are not reimplemented here (P, R, F1).
REFERENCE_ROWS = [
    ("Grouper", 0.71, 0.62, 0.66),
    ("LBDM", 0.70, 0.60, 0.63),
    ("RBM10+DO+PS", 0.80, 0.55, 0.63),
    ("RBM10+DO", 0.78, 0.53, 0.61),
    ("RBM10", 0.83, 0.50, 0.60),
    ("IDyOM", 0.76, 0.50, 0.58),
    ("GPR 2a", 0.99, 0.45, 0.58),
    ("GPR 2b", 0.47, 0.42, 0.39),
    ("GPR 3a", 0.29, 0.46, 0.35),
    ("GPR 3d", 0.66, 0.22, 0.31),
    ("PMI", 0.16, 0.32, 0.21),
    ("TP", 0.17, 0.19, 0.17),
    ("Always", 0.13, 1.00, 0.22),
    ("Never", 0.00, 0.00, 0.00),
]


def baseline_always(melody: Melody) -> np.ndarray:
    return force_final(np.ones(len(melody), dtype=np.int8))


def baseline_never(melody: Melody) -> np.ndarray:
    return force_final(np.zeros(len(melody), dtype=np.int8))


def baseline_gpr2a(melody: Melody) -> np.ndarray:
    """Boundary at every note preceded by a rest, plus the final note."""
    return force_final((melody.rests() > 0).astype(np.int8))


def melody_symbols(melody: Melody, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> list[tuple]:
    return [tuple(int(x) for x in row) for row in melody_bins(melody, cfg)]


@dataclass
class DigramStats:
    pairs: Counter = field(default_factory=Counter)
    left: Counter = field(default_factory=Counter)      # symbol counts as a predecessor
    unigrams: Counter = field(default_factory=Counter)
    alphabet_size: int = 1

    @property
    def n_pairs(self) -> int:
        return sum(self.pairs.values())

    @property
    def n_unigrams(self) -> int:
        return sum(self.unigrams.values())

    @classmethod
    def build(cls, corpus, cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> "DigramStats":
        melodies = list(corpus)
        if not melodies:
            raise EmptyTrainingSet("digram statistics need at least one melody")
        stats = cls(alphabet_size=(cfg.abs_interval_bins * cfg.contour_bins
                                   * cfg.ioi_bins * cfg.ooi_bins))
        for m in melodies:
            syms = melody_symbols(m, cfg)
            stats.unigrams.update(syms)
            stats.left.update(syms[:-1])
            stats.pairs.update(zip(syms[:-1], syms[1:]))
        return stats

    def transition_prob(self, a, b) -> float:
        """Add-one smoothed P(b | a)."""
        return (self.pairs[(a, b)] + 1) / (self.left[a] + self.alphabet_size)

    def unigram_prob(self, a) -> float:
        return (self.unigrams[a] + 1) / (self.n_unigrams + self.alphabet_size)

    def pair_prob(self, a, b) -> float:
        return (self.pairs[(a, b)] + 1) / (self.n_pairs + self.alphabet_size ** 2)

    def pmi(self, a, b) -> float:
        return math.log2(self.pair_prob(a, b) / (self.unigram_prob(a) * self.unigram_prob(b)))

    @property
    def pmi_offset(self) -> float:
        """Upper bound on PMI under this smoothing; added to -PMI to keep strengths >= 0."""
        return 2 * math.log2(self.n_unigrams + self.alphabet_size)


def digram_strengths(stats: DigramStats, melody: Melody, method: str,
                     cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> np.ndarray:
    """Raw per-note strengths: -log2 P(s_t | s_t-1) for TP, -PMI(s_t-1, s_t) for PMI.

    Note 0 has no predecessor; it takes note 1's value so that the profile
    does not start with an artificial rise.
    """
    syms = melody_symbols(melody, cfg)
    out = np.zeros(len(syms))
    for t in range(1, len(syms)):
        a, b = syms[t - 1], syms[t]
        if method == TP:
            out[t] = -math.log2(stats.transition_prob(a, b))
        elif method == PMI:
            out[t] = -stats.pmi(a, b)
        else:
            raise ValueError(f"unknown digram method {method!r}")
    if len(out) > 1:
        out[0] = out[1]
    return out


def baseline_digram(train, test=None, method: str = TP,
                    cfg: ViewpointConfig = DEFAULT_VIEWPOINTS) -> dict[str, Bsp]:
    """Digram boundary-strength profiles for ``test`` from statistics of ``train``.

    PMI strengths are shifted by a constant (``DigramStats.pmi_offset``) so
    profiles stay non-negative; TP strengths need no shift.
    """
    stats = DigramStats.build(train, cfg)
    test = train if test is None else test
    out = {}
    for m in test:
        s = digram_strengths(stats, m, method, cfg)
        if method == PMI:
            s = s + stats.pmi_offset
        out[m.id] = Bsp(m.id, s)
    return out


SEGMENTERS = {
    "always": baseline_always,
    "never": baseline_never,
    "gpr2a": baseline_gpr2a,
}


def segment_corpus(corpus: Corpus, method: str) -> dict[str, np.ndarray]:
    fn = SEGMENTERS[method]
    return {m.id: fn(m) for m in corpus}
