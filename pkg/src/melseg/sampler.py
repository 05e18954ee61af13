"""Monte-Carlo probability estimates from fantasy particles.

A set of particles is Gibbs-sampled from random starting points; the
visible activation vector of each particle after the last sweep gives a
product-of-Bernoullis likelihood for the query vector, and the estimate is
the average over particles. Holding some visible bits fixed during
sampling turns the same estimate into a conditional probability of the
remaining (free) bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, EmptyFreeSet
from .rbm import RbmModel
from .rng import keyed_rng

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    n_particles: int = 150
    gibbs_steps: int = 150
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.gibbs_steps < 1:
            raise ValueError("gibbs_steps must be >= 1")


def binomial_estimate(q, v) -> float | np.ndarray:
    """Average over particles of prod_j q_j^v_j (1 - q_j)^(1 - v_j).

    Args:
        q: (..., N, k) final visible activations of N particles.
        v: (..., k) binary query vector(s), broadcast over particles.
    """
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)[..., None, :]
    with np.errstate(divide="ignore"):
        logp = np.where(v > 0.5, np.log(q), np.log1p(-q)).sum(axis=-1)
    est = np.exp(logp).mean(axis=-1)
    return np.clip(est, 0.0, 1.0)


def _free_index(free, r: int) -> np.ndarray:
    free = np.unique(np.asarray(list(free), dtype=np.int64))
    if free.size == 0:
        raise EmptyFreeSet("free index set is empty")
    if free[0] < 0 or free[-1] >= r:
        raise DimensionMismatch(f"free indices must lie in [0, {r})")
    return free


def clamped_activations(model: RbmModel, V, free, cfg: SamplerConfig,
                        rng: np.random.Generator, observer=None) -> np.ndarray:
    """Run clamped Gibbs chains and return the final-sweep activations of the free bits.

    Args:
        model: the RBM.
        V: (R, r) rows whose non-free bits are held fixed.
        free: sorted index array of free visible units (shared by all rows).
        cfg: particle count and number of sweeps.
        rng: random source for initialization and sampling.
        observer: optional ``observer(step, full_visible_state)`` called after
            every sweep with the (R, N, r) visible configuration, for checking
            that clamped bits never move.

    Returns:
        (R, N, len(free)) visible probabilities from the last sweep.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    R, r = V.shape
    N = cfg.n_particles
    clamped = np.setdiff1d(np.arange(r), free)
    W_free = model.W[free]
    a_free = model.a[free]
    # clamped units feed the hidden layer through a constant offset per row
    offset = model.b + V[:, clamped] @ model.W[clamped]
    offset = np.repeat(offset, N, axis=0)

    x = rng.integers(0, 2, size=(R * N, len(free))).astype(np.float64)
    for step in range(cfg.gibbs_steps):
        hp = expit(offset + x @ W_free)
        h = (rng.random(hp.shape) < hp).astype(np.float64)
        vp = expit(a_free + h @ W_free.T)
        if step < cfg.gibbs_steps - 1:
            x = (rng.random(vp.shape) < vp).astype(np.float64)
        if observer is not None:
            full = np.repeat(V, N, axis=0)
            full[:, free] = x
            observer(step, full.reshape(R, N, r))
    return vp.reshape(R, N, len(free))


def estimate_conditional(model: RbmModel, v, free_index_set, cfg: SamplerConfig = SamplerConfig(),
                         *, key=(), observer=None) -> float:
    """Monte-Carlo estimate of p(v[free] | v[clamped]).

    Every bit outside ``free_index_set`` is clamped to its value in ``v``.
    The random stream is keyed by ``(cfg.seed, *key)``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != model.r:
        raise DimensionMismatch(f"v must have length {model.r}")
    free = _free_index(free_index_set, model.r)
    rng = keyed_rng(cfg.seed, "particles", *key)
    q = clamped_activations(model, v[None, :], free, cfg, rng, observer)
    return float(binomial_estimate(q[0], v[free]))


def estimate_prob(model: RbmModel, v, cfg: SamplerConfig = SamplerConfig(), *, key=()) -> float:
    """Monte-Carlo estimate of the marginal p(v) (all bits free)."""
    return estimate_conditional(model, v, range(model.r), cfg, key=key)


def conditional_note_probs(model: RbmModel, rows, n: int, cfg: SamplerConfig = SamplerConfig(),
                           *, key=()) -> np.ndarray:
    """p(last note block | preceding blocks) for each n-gram row, floored at 1e-12.

    All rows share one random stream keyed by ``(cfg.seed, *key)``; callers
    pass a per-melody key so results do not depend on batching.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != model.r:
        raise DimensionMismatch(f"rows have width {rows.shape[1]}, model expects {model.r}")
    if model.r % n:
        raise DimensionMismatch(f"model width {model.r} is not a multiple of n={n}")
    width = model.r // n
    free = np.arange(model.r - width, model.r)
    rng = keyed_rng(cfg.seed, "particles", *key)
    q = clamped_activations(model, rows, free, cfg, rng)
    p = binomial_estimate(q, rows[:, free])
    return np.maximum(p, PROB_FLOOR)


def conditional_note_prob(model: RbmModel, batch_row, n: int,
                          cfg: SamplerConfig = SamplerConfig(), *, key=()) -> float:
    return float(conditional_note_probs(model, np.asarray(batch_row)[None, :], n, cfg, key=key)[0])
