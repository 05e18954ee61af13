import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melseg.errors import EmptyBsp, EmptyKSet
from melseg.infocontent import Bsp
from melseg.peakpick import (
    AS_PRINTED,
    STANDARD_WEIGHTED,
    PeakPickConfig,
    peak_statistics,
    pick_boundaries,
    sweep_k,
)

profiles = st.lists(st.floats(0.0, 30.0, allow_nan=False), min_size=1, max_size=40)


def brute_pick(s, k, variance):
    """Direct transcription of the picking rule, one position at a time."""
    out = [0] * len(s)
    for t in range(1, len(s)):
        rise = s[t] > s[t - 1]
        hold = t == len(s) - 1 or s[t] >= s[t + 1]
        w = list(range(1, t + 1))
        m = sum(wi * si for wi, si in zip(w, s[:t])) / sum(w)
        if variance == AS_PRINTED:
            dev = sum((wi * si - m) ** 2 for wi, si in zip(w, s[:t])) / sum(w)
        else:
            dev = sum(wi * (si - m) ** 2 for wi, si in zip(w, s[:t])) / sum(w)
        out[t] = int(rise and hold and s[t] > k * math.sqrt(dev) + m)
    out[-1] = 1
    return out


class TestPickBoundaries:
    def test_constant_profile(self):
        np.testing.assert_array_equal(pick_boundaries(Bsp("c", [2.0] * 4)), [0, 0, 0, 1])

    def test_hand_example(self):
        cand, mean, spread = peak_statistics([1, 1, 1, 10])
        assert mean[3] == pytest.approx(1.0)
        assert spread[3] == pytest.approx(math.sqrt(5 / 6))
        assert 1.0 * spread[3] + mean[3] == pytest.approx(1.9129, abs=1e-4)
        np.testing.assert_array_equal(pick_boundaries([1, 1, 1, 10], PeakPickConfig(k=1)),
                                      [0, 0, 0, 1])

    def test_internal_peak(self):
        s = [1.0, 1.0, 1.0, 10.0, 1.0, 1.0]
        np.testing.assert_array_equal(pick_boundaries(s), [0, 0, 0, 1, 0, 1])

    def test_formulas_differ(self):
        # a late peak: the in-square weights inflate the as-printed spread
        s = [1.0, 2.0] * 10 + [4.0, 1.0]
        assert pick_boundaries(s, PeakPickConfig(1.0, STANDARD_WEIGHTED))[20] == 1
        assert pick_boundaries(s, PeakPickConfig(1.0, AS_PRINTED))[20] == 0

    def test_single_note(self):
        np.testing.assert_array_equal(pick_boundaries([3.0]), [1])

    def test_empty(self):
        with pytest.raises(EmptyBsp):
            pick_boundaries([])

    def test_bad_config(self):
        with pytest.raises(ValueError):
            PeakPickConfig(k=0)
        with pytest.raises(ValueError):
            PeakPickConfig(variance="other")

    @settings(max_examples=100, deadline=None)
    @given(profiles, st.sampled_from([0.24, 0.7, 1.0]), st.sampled_from([AS_PRINTED,
                                                                        STANDARD_WEIGHTED]))
    def test_matches_direct_rule(self, s, k, variance):
        np.testing.assert_array_equal(pick_boundaries(s, PeakPickConfig(k, variance)),
                                      brute_pick(s, k, variance))

    @settings(max_examples=100, deadline=None)
    @given(profiles, st.sampled_from([0.1, 3.0, 1e3]), st.sampled_from([AS_PRINTED,
                                                                        STANDARD_WEIGHTED]))
    def test_scale_invariant(self, s, c, variance):
        cfg = PeakPickConfig(0.8, variance)
        np.testing.assert_array_equal(pick_boundaries(np.array(s) * c, cfg),
                                      pick_boundaries(s, cfg))


class TestSweepK:
    truth = {"a": np.array([0, 0, 0, 1, 0, 1])}
    bsp = {"a": np.array([1.0, 1.0, 1.0, 10.0, 1.0, 1.0])}

    def test_single_k(self):
        assert sweep_k(self.bsp, self.truth, [0.9]).best_k == 0.9

    def test_tie_goes_to_smaller(self):
        res = sweep_k(self.bsp, self.truth, [1.0, 0.7])
        assert res.table[0.7].f1 == res.table[1.0].f1 == 1.0
        assert res.best_k == 0.7

    def test_empty(self):
        with pytest.raises(EmptyKSet):
            sweep_k(self.bsp, self.truth, [])

    def test_best_maximizes(self):
        bsp = {"a": np.array([1.0, 3.0, 1.0, 2.0, 1.0, 5.0, 1.0, 1.0])}
        truth = {"a": np.array([0, 0, 0, 0, 0, 1, 0, 1])}
        res = sweep_k(bsp, truth, [0.1, 0.5, 1.0, 2.0], STANDARD_WEIGHTED)
        assert res.best.f1 == max(c.f1 for c in res.table.values())
