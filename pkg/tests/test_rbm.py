import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

import oracles
from melseg.errors import DimensionMismatch, EmptyStream, TooLargeForEnumeration
from melseg.rbm import (
    RbmModel,
    TrainConfig,
    exact_conditional,
    exact_conditional_prob,
    exact_distribution,
    exact_prob,
    free_energy,
    free_energy_grad,
    hidden_probs,
    load_model,
    log_partition,
    save_model,
    sparsity_penalty,
    sparsity_preact_grad,
    train_fpcd,
    visible_probs,
)
from melseg.rng import keyed_rng

QUIET = dict(dropout_hidden=0.0, dropout_visible=0.0, sparsity_strength=0.0)


class TestConditionals:
    def test_zero_model_is_half(self):
        np.testing.assert_array_equal(hidden_probs(RbmModel.zeros(3, 2), [1, 0, 1]), [0.5, 0.5])
        np.testing.assert_array_equal(visible_probs(RbmModel.zeros(3, 2), [1, 1]), [0.5] * 3)

    def test_saturation(self):
        m = RbmModel(np.zeros((2, 1)), np.zeros(2), np.array([-60.0]))
        assert hidden_probs(m, [1, 1])[0] < 1e-20

    def test_hand_2x2(self):
        m = RbmModel(np.array([[1.0, -2.0], [0.5, 0.0]]), np.array([0.1, -0.3]),
                     np.array([0.2, 0.4]))
        # hidden: sigma(b + v W) with v = [1, 1]
        np.testing.assert_allclose(hidden_probs(m, [1, 1]),
                                   [1 / (1 + math.exp(-1.7)), 1 / (1 + math.exp(1.6))])
        # visible: sigma(a + W h) with h = [1, 0]
        np.testing.assert_allclose(visible_probs(m, [1, 0]),
                                   [1 / (1 + math.exp(-1.1)), 1 / (1 + math.exp(-0.2))])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            hidden_probs(RbmModel.zeros(3, 2), [1, 0])
        with pytest.raises(DimensionMismatch):
            visible_probs(RbmModel.zeros(3, 2), [1, 0, 0])


class TestFreeEnergy:
    def test_zero_model(self):
        assert free_energy(RbmModel.zeros(4, 5), [1, 0, 1, 1]) == pytest.approx(-5 * math.log(2))

    def test_visible_bias_only(self):
        m = RbmModel(np.zeros((2, 3)), np.array([1.0, 0.0]), np.zeros(3))
        assert free_energy(m, [1, 0]) == pytest.approx(-1 - 3 * math.log(2))

    def test_matches_pure_python(self, rbm6x4, rbm6x4_fixture):
        d = rbm6x4_fixture
        for v in d["configs"][::7]:
            assert free_energy(rbm6x4, v) == pytest.approx(
                oracles.free_energy(d["W"], d["a"], d["b"], v), abs=1e-12)

    def test_gradient_central_differences(self):
        m = RbmModel.random(5, 3, seed=11, scale=0.7)
        V = keyed_rng(4, "fd").integers(0, 2, (6, 5)).astype(float)
        gW, ga, gb = free_energy_grad(m, V)
        eps = 1e-4
        for name, grad in (("W", gW), ("a", ga), ("b", gb)):
            param = getattr(m, name)
            num = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                old = param[idx]
                param[idx] = old + eps
                up = free_energy(m, V).mean()
                param[idx] = old - eps
                down = free_energy(m, V).mean()
                param[idx] = old
                num[idx] = (up - down) / (2 * eps)
            rel = np.linalg.norm(num - grad) / max(np.linalg.norm(num), 1e-12)
            assert rel < 1e-4, name


class TestSparsity:
    def test_zero_at_target_is_minimum(self):
        h = np.full((4, 5), 0.04)
        base = sparsity_penalty(h, 0.04)
        assert sparsity_penalty(h + 0.01, 0.04) > base
        np.testing.assert_allclose(sparsity_preact_grad(h, 0.04), 0.0, atol=1e-12)

    def test_gradient_central_differences(self):
        rng = keyed_rng(1, "sparsity-fd")
        z = rng.normal(-1.0, 1.0, (7, 4))
        analytic = sparsity_preact_grad(expit(z), 0.04) / len(z)
        eps = 1e-4
        num = np.zeros_like(z)
        for idx in np.ndindex(z.shape):
            old = z[idx]
            z[idx] = old + eps
            up = sparsity_penalty(expit(z), 0.04)
            z[idx] = old - eps
            down = sparsity_penalty(expit(z), 0.04)
            z[idx] = old
            num[idx] = (up - down) / (2 * eps)
        rel = np.linalg.norm(num - analytic) / np.linalg.norm(num)
        assert rel < 1e-4


class TestEnumeration:
    def test_uniform_zero_model(self):
        np.testing.assert_allclose(exact_distribution(RbmModel.zeros(3, 2)), 1 / 8)

    def test_positive_coupling_prefers_on(self):
        m = RbmModel(np.array([[5.0]]), np.zeros(1), np.zeros(1))
        assert exact_prob(m, [1]) > exact_prob(m, [0])

    def test_frozen_6x4_table(self, rbm6x4, rbm6x4_fixture):
        np.testing.assert_allclose(exact_distribution(rbm6x4), rbm6x4_fixture["probs"],
                                   rtol=1e-10, atol=0)
        v = rbm6x4_fixture["configs"][37]
        assert exact_prob(rbm6x4, v) == pytest.approx(rbm6x4_fixture["probs"][37], rel=1e-10)

    def test_conditional_frozen(self, rbm6x4, rbm6x4_fixture):
        d = rbm6x4_fixture
        clamp = {int(k): v for k, v in d["clamp"].items()}
        free, comps, probs = exact_conditional(rbm6x4, clamp)
        assert free.tolist() == d["free"]
        np.testing.assert_array_equal(comps, d["completions"])
        np.testing.assert_allclose(probs, d["conditional"], rtol=1e-10)

    def test_conditional_prob_lookup(self, rbm6x4, rbm6x4_fixture):
        d = rbm6x4_fixture
        v = np.array([1, 1, 0, 0, 1, 1])
        expected = d["conditional"][d["completions"].index([1, 0, 1])]
        assert exact_conditional_prob(rbm6x4, v, d["free"]) == pytest.approx(expected, rel=1e-10)

    def test_conditional_zero_model_uniform(self):
        _, _, probs = exact_conditional(RbmModel.zeros(5, 2), {0: 1, 3: 0})
        np.testing.assert_allclose(probs, 1 / 8)

    def test_clamp_everything_is_point_mass(self):
        _, comps, probs = exact_conditional(RbmModel.random(3, 2, seed=2), {0: 1, 1: 0, 2: 1})
        assert comps.shape == (1, 0)
        np.testing.assert_array_equal(probs, [1.0])

    def test_budget(self):
        with pytest.raises(TooLargeForEnumeration):
            log_partition(RbmModel.zeros(15, 6))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5))
    def test_normalized(self, seed, r, q):
        m = RbmModel.random(r, q, seed=seed)
        assert exact_distribution(m).sum() == pytest.approx(1.0, abs=1e-12)


class TestTrainFpcd:
    def test_overfit_single_instance(self):
        v_star = np.array([1, 0, 1, 1, 0, 0], dtype=float)
        X = np.tile(v_star, (50, 1))
        probs = []
        cfg = TrainConfig(epochs=40, batch_size=10, learning_rate=0.05, n_chains=20, seed=3, **QUIET)
        train_fpcd(X, cfg, q=4, callback=lambda e, m: probs.append(exact_prob(m, v_star))
                   if e % 10 == 0 else None)
        init = keyed_rng(3, "train-fpcd").normal(0.0, cfg.init_scale, (6, 4))
        p0 = exact_prob(RbmModel(init, np.zeros(6), np.zeros(4)), v_star)
        trace = [p0] + probs
        assert all(b > a for a, b in zip(trace, trace[1:])), trace
        assert trace[-1] > 1 / 64

    def test_zero_learning_rate_keeps_init(self):
        X = keyed_rng(0, "x").integers(0, 2, (30, 6))
        cfg = TrainConfig(epochs=3, batch_size=10, learning_rate=0.0, n_chains=5, seed=8, **QUIET)
        m = train_fpcd(X, cfg, q=3)
        init = keyed_rng(8, "train-fpcd").normal(0.0, cfg.init_scale, (6, 3))
        np.testing.assert_array_equal(m.W, init)
        np.testing.assert_array_equal(m.a, 0.0)
        np.testing.assert_array_equal(m.W_fast, 0.0)

    def test_dropout_rescales_weights(self):
        X = keyed_rng(0, "x").integers(0, 2, (30, 6))
        cfg = TrainConfig(epochs=2, batch_size=10, learning_rate=0.0, n_chains=5, seed=8)
        m = train_fpcd(X, cfg, q=3)
        init = keyed_rng(8, "train-fpcd").normal(0.0, cfg.init_scale, (6, 3))
        np.testing.assert_allclose(m.W, init * 0.8 * 0.5)

    def test_seed_determinism(self):
        X = keyed_rng(0, "x").integers(0, 2, (40, 8))
        cfg = TrainConfig(epochs=3, batch_size=16, n_chains=7, seed=21)
        a, b = train_fpcd(X, cfg, q=5), train_fpcd(X, cfg, q=5)
        assert a.params_equal(b)
        assert a.training_log == b.training_log
        assert not a.params_equal(train_fpcd(X, TrainConfig(epochs=3, batch_size=16,
                                                            n_chains=7, seed=22), q=5))

    def test_empty_stream(self):
        with pytest.raises(EmptyStream):
            train_fpcd(np.zeros((0, 4)), TrainConfig(epochs=1))

    def test_probe_log_per_epoch(self):
        X = keyed_rng(0, "x").integers(0, 2, (20, 4))
        m = train_fpcd(X, TrainConfig(epochs=4, batch_size=5, n_chains=3), q=2)
        assert [e["epoch"] for e in m.training_log] == [1, 2, 3, 4]

    def test_batch_ramp(self):
        cfg = TrainConfig(batch_size_by_ngram=True)
        assert [cfg.effective_batch_size(n) for n in (1, 3, 10, 12)] == [250, 250, 1000, 1000]
        assert TrainConfig().effective_batch_size(10) == 250


class TestPersistence:
    def test_round_trip(self, tmp_path):
        m = RbmModel.random(4, 3, seed=5)
        m.n, m.viewpoint_config = 2, {"abs_interval_bins": 13}
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert back.params_equal(m)
        assert back.n == 2 and back.viewpoint_config == m.viewpoint_config


def test_oracle_agrees_with_itself_on_joint_sum():
    # the oracle sums over hidden states; check it against its own free energy form
    W, a, b = [[0.3, -0.2]], [0.1], [0.0, 0.5]
    configs, probs = oracles.visible_table(W, a, b)
    f = [oracles.free_energy(W, a, b, v) for v in configs]
    z = sum(math.exp(-x) for x in f)
    np.testing.assert_allclose(probs, [math.exp(-x) / z for x in f], rtol=1e-12)
    assert list(itertools.chain(*configs)) == [0, 1]
