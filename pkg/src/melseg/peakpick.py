"""Boundary selection from a boundary-strength profile.

A note is a candidate when its strength rises above the previous value and
is not exceeded by the next one. A candidate is kept when it exceeds the
mean of all earlier values, weighted by a rising linear ramp, by more than
``k`` times their weighted spread.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import force_final
from .errors import EmptyBsp, EmptyKSet
from .metrics import Counts, boundary_counts

AS_PRINTED = "as-printed"
STANDARD_WEIGHTED = "standard-weighted"

RAW_IC_KS = (0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.00)
SMOOTHED_KS = (0.24, 0.26, 0.28, 0.30, 0.32, 0.34, 0.36)


@dataclass(frozen=True)
class PeakPickConfig:
    k: float = 1.0
    variance: str = AS_PRINTED

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.variance not in (AS_PRINTED, STANDARD_WEIGHTED):
            raise ValueError(f"unknown variance formula {self.variance!r}")


def peak_statistics(values, variance: str = AS_PRINTED):
    """Candidate mask and running weighted mean/spread for every position.

    Returns:
        ``(candidates, mean, spread)``; ``mean[t]`` and ``spread[t]`` summarize
        values ``0..t-1`` (0-based) with weights ``1..t``. Position 0 is never
        a candidate.

    With the ``as-printed`` formula the weights sit inside the square,
    ``sum (w_i S_i - m)^2 / sum w_i``; ``standard-weighted`` uses
    ``sum w_i (S_i - m)^2 / sum w_i``.
    """
    s = np.asarray(values, dtype=np.float64)
    T = len(s)
    if T == 0:
        raise EmptyBsp("boundary-strength profile is empty")
    cand = np.zeros(T, dtype=bool)
    if T > 1:
        cand[1:] = s[1:] > s[:-1]
        cand[1:-1] &= s[1:-1] >= s[2:]
    mean = np.zeros(T)
    spread = np.zeros(T)
    for t in range(1, T):
        prev = s[:t]
        w = np.arange(1, t + 1, dtype=np.float64)
        wsum = w.sum()
        m = (w * prev).sum() / wsum
        if variance == AS_PRINTED:
            dev = ((w * prev - m) ** 2).sum() / wsum
        else:
            dev = (w * (prev - m) ** 2).sum() / wsum
        mean[t] = m
        spread[t] = np.sqrt(dev)
    return cand, mean, spread


def pick_from_stats(values, stats, k: float) -> np.ndarray:
    cand, mean, spread = stats
    keep = cand & (np.asarray(values, dtype=np.float64) > k * spread + mean)
    return force_final(keep.astype(np.int8))


def pick_boundaries(bsp, cfg: PeakPickConfig = PeakPickConfig()) -> np.ndarray:
    """Binary boundary vector for a BSP (a ``Bsp`` or a plain sequence).

    The first note is never a boundary and the last note always is.
    """
    values = getattr(bsp, "values", bsp)
    values = np.asarray(values, dtype=np.float64)
    return pick_from_stats(values, peak_statistics(values, cfg.variance), cfg.k)


@dataclass
class SweepResult:
    best_k: float
    table: dict          # k -> Counts
    predictions: dict    # k -> {melody_id: boundary vector}

    def f1(self, k: float) -> float:
        return self.table[k].f1

    @property
    def best(self) -> Counts:
        return self.table[self.best_k]


def sweep_k(bsps: dict, truth: dict, k_values, variance: str = AS_PRINTED) -> SweepResult:
    """Evaluate every k and return the F1-maximizing one (ties go to the smaller k).

    Args:
        bsps: melody id -> BSP values.
        truth: melody id -> ground-truth boundary vector.
        k_values: thresholds to try.
    """
    ks = sorted(float(k) for k in k_values)
    if not ks:
        raise EmptyKSet("no k values to evaluate")
    stats = {mid: peak_statistics(getattr(v, "values", v), variance) for mid, v in bsps.items()}
    table: dict[float, Counts] = {}
    preds: dict[float, dict] = {}
    for k in ks:
        preds[k] = {mid: pick_from_stats(getattr(bsps[mid], "values", bsps[mid]), stats[mid], k)
                    for mid in truth}
        table[k] = boundary_counts(preds[k], truth)
    best = ks[0]
    for k in ks[1:]:
        if table[k].f1 > table[best].f1:
            best = k
    return SweepResult(best, table, preds)
