import numpy as np
import pytest

from melseg.errors import DimensionMismatch, EmptyFreeSet
from melseg.rbm import RbmModel, TrainConfig, exact_conditional_prob, train_fpcd
from melseg.sampler import (
    PROB_FLOOR,
    SamplerConfig,
    binomial_estimate,
    conditional_note_prob,
    conditional_note_probs,
    estimate_conditional,
    estimate_prob,
)


class TestBinomialEstimate:
    def test_single_particle_product(self):
        assert binomial_estimate([[0.5, 0.5]], [1, 0]) == pytest.approx(0.25)

    def test_degenerate_exact_match(self):
        v = np.array([1, 0, 1, 1])
        assert binomial_estimate(np.tile(v, (5, 1)).astype(float), v) == 1.0

    def test_average_over_particles(self):
        q = np.array([[0.9, 0.2], [0.5, 0.5]])
        expected = (0.9 * 0.8 + 0.5 * 0.5) / 2
        assert binomial_estimate(q, [1, 0]) == pytest.approx(expected)


class TestEstimates:
    def test_independent_free_bit(self):
        m = RbmModel.zeros(4, 3)
        for clamp in ([0, 0, 0, 1], [1, 1, 1, 0]):
            assert estimate_conditional(m, clamp, [3], SamplerConfig(20, 5)) == 0.5

    def test_all_free_equals_marginal(self, rbm6x4):
        cfg = SamplerConfig(50, 20, seed=4)
        v = [1, 0, 0, 1, 1, 0]
        assert estimate_conditional(rbm6x4, v, range(6), cfg, key=("k",)) == \
            estimate_prob(rbm6x4, v, cfg, key=("k",))

    def test_close_to_exact(self, rbm6x4, rbm6x4_fixture):
        cfg = SamplerConfig(800, 100, seed=1)
        probs = np.array(rbm6x4_fixture["probs"])
        for i in np.argsort(probs)[-4:]:
            v = rbm6x4_fixture["configs"][i]
            assert estimate_prob(rbm6x4, v, cfg) == pytest.approx(probs[i], rel=0.15)

    def test_conditional_close_to_exact(self, rbm6x4):
        v = np.array([0, 1, 1, 0, 1, 0])
        free = [1, 3, 5]
        est = estimate_conditional(rbm6x4, v, free, SamplerConfig(800, 100, seed=2))
        assert est == pytest.approx(exact_conditional_prob(rbm6x4, v, free), rel=0.1)

    def test_clamped_bits_never_move(self, rbm6x4):
        v = np.array([1, 0, 1, 1, 0, 1])
        free = [0, 4]
        clamped = [1, 2, 3, 5]
        seen = []

        def observer(step, state):
            assert state.shape == (1, 30, 6)
            np.testing.assert_array_equal(state[..., clamped], np.broadcast_to(v[clamped],
                                                                              (1, 30, 4)))
            seen.append(step)

        estimate_conditional(rbm6x4, v, free, SamplerConfig(30, 12), observer=observer)
        assert seen == list(range(12))

    def test_determinism_and_keying(self, rbm6x4):
        cfg = SamplerConfig(40, 10, seed=9)
        v = [0, 0, 1, 1, 0, 1]
        a = estimate_prob(rbm6x4, v, cfg, key=("x", 1))
        assert a == estimate_prob(rbm6x4, v, cfg, key=("x", 1))
        assert a != estimate_prob(rbm6x4, v, cfg, key=("x", 2))

    def test_errors(self, rbm6x4):
        with pytest.raises(EmptyFreeSet):
            estimate_conditional(rbm6x4, [0] * 6, [], SamplerConfig(2, 2))
        with pytest.raises(DimensionMismatch):
            estimate_prob(rbm6x4, [0] * 5, SamplerConfig(2, 2))
        with pytest.raises(DimensionMismatch):
            estimate_conditional(rbm6x4, [0] * 6, [6], SamplerConfig(2, 2))


class TestNoteConditional:
    def test_unigram_is_marginal(self, rbm6x4):
        cfg = SamplerConfig(30, 10, seed=3)
        row = np.array([1, 0, 1, 0, 0, 1])
        assert conditional_note_prob(rbm6x4, row, 1, cfg, key=("r",)) == \
            estimate_prob(rbm6x4, row, cfg, key=("r",))

    def test_overfit_bigram(self):
        row = np.array([1, 0, 0, 1, 0, 1, 1, 0], dtype=float)
        cfg = TrainConfig(epochs=60, batch_size=10, learning_rate=0.1, n_chains=20, seed=1,
                          dropout_hidden=0.0, dropout_visible=0.0, sparsity_strength=0.0)
        m = train_fpcd(np.tile(row, (40, 1)), cfg, q=6)
        p = conditional_note_prob(m, row, 2, SamplerConfig(100, 50, seed=0))
        assert p > 0.9
        assert exact_conditional_prob(m, row, range(4, 8)) > 0.9

    def test_floor(self):
        m = RbmModel(np.zeros((4, 1)), np.full(4, -40.0), np.zeros(1))
        p = conditional_note_probs(m, np.ones((2, 4)), 2, SamplerConfig(5, 3))
        np.testing.assert_array_equal(p, PROB_FLOOR)

    def test_deterministic_rows(self, rbm6x4):
        cfg = SamplerConfig(20, 5, seed=0)
        rows = np.array([[1, 0, 1, 0, 1, 1], [0, 0, 0, 1, 1, 0]])
        together = conditional_note_probs(rbm6x4, rows, 2, cfg, key=("a",))
        again = conditional_note_probs(rbm6x4, rows, 2, cfg, key=("a",))
        np.testing.assert_array_equal(together, again)
