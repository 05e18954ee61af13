"""Micro-averaged boundary precision, recall and F1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class Counts:
    tp: int
    fp: int
    fn: int

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def prf1(self) -> tuple[float, float, float]:
        return self.precision, self.recall, self.f1


def boundary_counts(pred, truth) -> Counts:
    """Pool TP/FP/FN over aligned per-melody boundary vectors.

    Accepts a single pair of vectors, or two sequences (or dicts keyed by
    melody id) of vectors.
    """
    if isinstance(pred, dict):
        if set(pred) != set(truth):
            raise LengthMismatch("prediction and truth cover different melodies")
        keys = list(truth)
        pairs = [(pred[k], truth[k]) for k in keys]
    elif len(pred) and np.ndim(pred[0]) == 0:
        pairs = [(pred, truth)]
    else:
        if len(pred) != len(truth):
            raise LengthMismatch(f"{len(pred)} predictions for {len(truth)} melodies")
        pairs = list(zip(pred, truth))
    tp = fp = fn = 0
    for p, t in pairs:
        p = np.asarray(p).astype(bool)
        t = np.asarray(t).astype(bool)
        if p.shape != t.shape:
            raise LengthMismatch(f"prediction length {p.shape} != truth length {t.shape}")
        tp += int(np.sum(p & t))
        fp += int(np.sum(p & ~t))
        fn += int(np.sum(~p & t))
    return Counts(tp, fp, fn)


def prf1(pred, truth) -> tuple[float, float, float]:
    return boundary_counts(pred, truth).prf1()
