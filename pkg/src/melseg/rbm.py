"""Binary-binary restricted Boltzmann machine.

Energy ``E(v, h) = -a.v - b.h - v.W.h`` with visible bias ``a`` (length r),
hidden bias ``b`` (length q) and weights ``W`` (r x q). Training uses
persistent contrastive divergence with fast weights (FPCD), momentum,
L2 decay, a sparsity/selectivity penalty on hidden activations and
dropout on both layers.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .errors import (
    DimensionMismatch,
    EmptyStream,
    ModelFormatError,
    NonFiniteGradient,
    TooLargeForEnumeration,
)
from .rng import keyed_rng

log = logging.getLogger(__name__)

ENUMERATION_BUDGET = 20


@dataclass
class RbmModel:
    W: np.ndarray
    a: np.ndarray
    b: np.ndarray
    W_fast: np.ndarray = None
    a_fast: np.ndarray = None
    b_fast: np.ndarray = None
    seed: int = 0
    epochs: int = 0
    n: int | None = None
    viewpoint_config: dict | None = None
    training_log: list = field(default_factory=list)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        r, q = self.W.shape
        if self.a.shape != (r,) or self.b.shape != (q,):
            raise DimensionMismatch(
                f"bias shapes {self.a.shape}, {self.b.shape} do not fit W {self.W.shape}")
        if self.W_fast is None:
            self.W_fast = np.zeros_like(self.W)
        if self.a_fast is None:
            self.a_fast = np.zeros_like(self.a)
        if self.b_fast is None:
            self.b_fast = np.zeros_like(self.b)

    @property
    def r(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, r: int, q: int, **kw) -> "RbmModel":
        return cls(np.zeros((r, q)), np.zeros(r), np.zeros(q), **kw)

    @classmethod
    def random(cls, r: int, q: int, seed: int = 0, scale: float = 1.0) -> "RbmModel":
        """Gaussian parameters of standard deviation ``scale``; handy for tests."""
        rng = keyed_rng(seed, "random-rbm")
        return cls(rng.normal(0, scale, (r, q)), rng.normal(0, scale, r),
                   rng.normal(0, scale, q), seed=seed)

    def copy(self) -> "RbmModel":
        return RbmModel(self.W.copy(), self.a.copy(), self.b.copy(), self.W_fast.copy(),
                        self.a_fast.copy(), self.b_fast.copy(), self.seed, self.epochs,
                        self.n, self.viewpoint_config, list(self.training_log))

    def params_equal(self, other: "RbmModel") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("W", "a", "b", "W_fast", "a_fast", "b_fast"))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, k)))
                   for k in ("W", "a", "b", "W_fast", "a_fast", "b_fast"))

    def decay_fast(self, decay: float) -> None:
        self.W_fast *= decay
        self.a_fast *= decay
        self.b_fast *= decay


def _check_width(x: np.ndarray, width: int, what: str) -> None:
    if x.shape[-1] != width:
        raise DimensionMismatch(f"{what} has length {x.shape[-1]}, expected {width}")


def hidden_probs(model: RbmModel, v, dropout_mask=None) -> np.ndarray:
    """p(h_j = 1 | v) for a vector or a batch of rows."""
    v = np.asarray(v, dtype=np.float64)
    _check_width(v, model.r, "visible input")
    p = expit(model.b + v @ model.W)
    if dropout_mask is not None:
        p = p * dropout_mask
    return p


def visible_probs(model: RbmModel, h, dropout_mask=None) -> np.ndarray:
    """p(v_i = 1 | h) for a vector or a batch of rows."""
    h = np.asarray(h, dtype=np.float64)
    _check_width(h, model.q, "hidden input")
    p = expit(model.a + h @ model.W.T)
    if dropout_mask is not None:
        p = p * dropout_mask
    return p


def free_energy(model: RbmModel, v) -> np.ndarray | float:
    """F(v) = -a.v - sum_j log(1 + exp(b_j + (v W)_j)); p(v) is proportional to exp(-F(v))."""
    v = np.asarray(v, dtype=np.float64)
    _check_width(v, model.r, "visible input")
    x = model.b + v @ model.W
    f = -(v @ model.a) - np.logaddexp(0.0, x).sum(axis=-1)
    return float(f) if f.ndim == 0 else f


def free_energy_grad(model: RbmModel, v):
    """Gradient of the mean free energy over rows of ``v`` w.r.t. (W, a, b)."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    _check_width(v, model.r, "visible input")
    h = expit(model.b + v @ model.W)
    n = len(v)
    return -(v.T @ h) / n, -v.mean(axis=0), -h.mean(axis=0)


def all_configurations(k: int) -> np.ndarray:
    """All 2**k binary vectors in lexicographic order (bit 0 most significant)."""
    idx = np.arange(2 ** k)[:, None]
    return ((idx >> np.arange(k - 1, -1, -1)) & 1).astype(np.float64)


def _check_budget(model: RbmModel) -> None:
    if model.r + model.q > ENUMERATION_BUDGET:
        raise TooLargeForEnumeration(
            f"r + q = {model.r + model.q} exceeds enumeration budget {ENUMERATION_BUDGET}")


def log_partition(model: RbmModel) -> float:
    """log Z, summing exp(-F) over every visible configuration."""
    _check_budget(model)
    return float(logsumexp(-free_energy(model, all_configurations(model.r))))


def exact_prob(model: RbmModel, v) -> float:
    """Exact marginal p(v) by enumeration (only for r + q <= 20)."""
    v = np.asarray(v, dtype=np.float64)
    _check_width(v, model.r, "visible input")
    return float(np.exp(-free_energy(model, v) - log_partition(model)))


def exact_distribution(model: RbmModel) -> np.ndarray:
    """p(v) for every configuration in ``all_configurations(r)`` order."""
    _check_budget(model)
    neg_f = -free_energy(model, all_configurations(model.r))
    return np.exp(neg_f - logsumexp(neg_f))


def exact_conditional(model: RbmModel, clamped: dict[int, int]):
    """Exact distribution of the free visible bits given the clamped ones.

    Args:
        model: an enumerable RBM.
        clamped: mapping visible index -> 0/1.

    Returns:
        ``(free_indices, completions, probs)`` where ``completions`` lists every
        assignment of the free bits in lexicographic order. With every bit
        clamped there is a single empty completion of probability 1.
    """
    _check_budget(model)
    for i, val in clamped.items():
        if not 0 <= i < model.r:
            raise DimensionMismatch(f"clamped index {i} outside [0, {model.r})")
        if val not in (0, 1):
            raise ValueError(f"clamped value must be 0/1, got {val}")
    free = np.array([i for i in range(model.r) if i not in clamped], dtype=np.int64)
    completions = all_configurations(len(free))
    v = np.zeros((len(completions), model.r))
    for i, val in clamped.items():
        v[:, i] = val
    v[:, free] = completions
    neg_f = -free_energy(model, v)
    return free, completions, np.exp(neg_f - logsumexp(neg_f))


def exact_conditional_prob(model: RbmModel, v, free) -> float:
    """Exact p(v[free] | v[not free])."""
    v = np.asarray(v)
    free = sorted(int(i) for i in free)
    clamped = {i: int(v[i]) for i in range(model.r) if i not in set(free)}
    _, completions, probs = exact_conditional(model, clamped)
    target = v[free].astype(np.float64)
    match = np.all(completions == target, axis=1)
    return float(probs[match][0])


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 250
    batch_size_by_ngram: bool = False
    learning_rate: float = 0.0085
    momentum: float = 0.6
    fast_lr_start: float = 0.002
    fast_lr_end: float = 0.007
    fast_decay: float = 0.95
    l2: float = 0.0035
    sparsity_target: float = 0.04
    sparsity_strength: float = 0.65
    dropout_hidden: float = 0.5
    dropout_visible: float = 0.2
    n_chains: int = 100
    init_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "momentum", "fast_lr_start", "fast_lr_end",
                     "fast_decay", "l2", "sparsity_strength", "init_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("dropout_hidden", "dropout_visible"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")
        if not 0 < self.sparsity_target < 1:
            raise ValueError("sparsity_target must be in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.n_chains < 1:
            raise ValueError("epochs >= 0, batch_size >= 1 and n_chains >= 1 required")

    def effective_batch_size(self, n: int | None) -> int:
        """Batch size, optionally ramped linearly from 250 (3-grams) to 1000 (10-grams)."""
        if not self.batch_size_by_ngram or n is None:
            return self.batch_size
        frac = min(max((n - 3) / 7, 0.0), 1.0)
        return int(round(250 + 750 * frac))


def _ce(m, target):
    m = np.clip(m, 1e-12, 1 - 1e-12)
    return -(target * np.log(m) + (1 - target) * np.log(1 - m))


def _dce(m, target):
    m = np.clip(m, 1e-12, 1 - 1e-12)
    return (m - target) / (m * (1 - m))


def sparsity_penalty(h: np.ndarray, target: float) -> float:
    """q * (mean cross-entropy of unit means + mean cross-entropy of example means).

    Unit means (each hidden unit averaged over the batch) penalize units that
    dominate; example means (each row averaged over units) penalize dense codes.
    """
    h = np.atleast_2d(h)
    q = h.shape[1]
    return float(q * (_ce(h.mean(axis=0), target).mean() + _ce(h.mean(axis=1), target).mean()))


def sparsity_preact_grad(h: np.ndarray, target: float) -> np.ndarray:
    """Batch size times d sparsity_penalty / d pre-activation, shaped like ``h``.

    ``v.T @ result / B`` is the weight gradient, averaged over the batch the
    same way as the likelihood term.
    """
    h = np.atleast_2d(h)
    unit = _dce(h.mean(axis=0), target)[None, :]
    example = _dce(h.mean(axis=1), target)[:, None]
    return (unit + example) * h * (1 - h)


def _sparsity_grads(v, h, target):
    dz = sparsity_preact_grad(h, target)
    B = len(v)
    return v.T @ dz / B, dz.mean(axis=0)


def train_fpcd(data, cfg: TrainConfig = TrainConfig(), q: int = 200, *, n: int | None = None,
               viewpoint_config: dict | None = None, probe=None,
               callback=None) -> RbmModel:
    """Fit an RBM with fast-weight persistent contrastive divergence.

    Args:
        data: (N, r) binary rows, or an NGramBatch.
        cfg: training hyperparameters.
        q: number of hidden units.
        n: n-gram length recorded in the model (and used by the batch-size ramp).
        viewpoint_config: recorded in the model for later compatibility checks.
        probe: rows whose mean free energy is logged per epoch (default: the
            first 100 training rows).
        callback: optional ``callback(epoch, model)`` called after each epoch
            with a snapshot whose fast weights are intact.

    Returns:
        Trained model with fast weights zeroed and weights rescaled by the
        dropout keep probabilities of both layers.
    """
    if hasattr(data, "rows"):
        n = data.n if n is None else n
        data = data.rows
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyStream("training data is empty")
    if q < 1:
        raise ValueError("q must be >= 1")
    N, r = X.shape
    rng = keyed_rng(cfg.seed, "train-fpcd")
    model = RbmModel(rng.normal(0.0, cfg.init_scale, (r, q)), np.zeros(r), np.zeros(q),
                     seed=cfg.seed, epochs=cfg.epochs, n=n, viewpoint_config=viewpoint_config)
    probe = X[:100] if probe is None else np.asarray(probe, dtype=np.float64)

    bs = min(cfg.effective_batch_size(n), N)
    n_batches = math.ceil(N / bs)
    total = max(cfg.epochs * n_batches, 1)
    keep_v = 1.0 - cfg.dropout_visible
    keep_h = 1.0 - cfg.dropout_hidden

    chains = rng.integers(0, 2, size=(cfg.n_chains, r)).astype(np.float64)
    vel_W = np.zeros_like(model.W)
    vel_a = np.zeros_like(model.a)
    vel_b = np.zeros_like(model.b)

    update = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        for bi in range(n_batches):
            frac = update / total
            lr = cfg.learning_rate * (1.0 - frac)
            fast_lr = cfg.fast_lr_start + (cfg.fast_lr_end - cfg.fast_lr_start) * frac
            V = X[order[bi * bs:(bi + 1) * bs]]
            B = len(V)

            # positive phase with dropout
            if cfg.dropout_visible > 0:
                V = V * (rng.random(V.shape) < keep_v)
            H_full = expit(model.b + V @ model.W)
            H = H_full
            if cfg.dropout_hidden > 0:
                H = H_full * (rng.random(H_full.shape) < keep_h)
            pos_W = V.T @ H / B
            pos_a = V.mean(axis=0)
            pos_b = H.mean(axis=0)

            # negative phase: one Gibbs sweep of the persistent chains on slow + fast weights
            Wc = model.W + model.W_fast
            hc = expit(model.b + model.b_fast + chains @ Wc)
            hs = (rng.random(hc.shape) < hc).astype(np.float64)
            vc = expit(model.a + model.a_fast + hs @ Wc.T)
            chains = (rng.random(vc.shape) < vc).astype(np.float64)
            Hn = expit(model.b + chains @ model.W)
            C = len(chains)
            neg_W = chains.T @ Hn / C
            neg_a = chains.mean(axis=0)
            neg_b = Hn.mean(axis=0)

            g_W = pos_W - neg_W
            g_a = pos_a - neg_a
            g_b = pos_b - neg_b
            if cfg.sparsity_strength > 0:
                s_W, s_b = _sparsity_grads(V, H_full, cfg.sparsity_target)
                g_W -= cfg.sparsity_strength * s_W
                g_b -= cfg.sparsity_strength * s_b

            if not (np.all(np.isfinite(g_W)) and np.all(np.isfinite(g_a))
                    and np.all(np.isfinite(g_b))):
                raise NonFiniteGradient(
                    f"epoch {epoch} batch {bi}: non-finite gradient "
                    f"(|W|max={np.nanmax(np.abs(model.W)):.3g}, lr={lr:.3g})")

            vel_W = cfg.momentum * vel_W + lr * (g_W - cfg.l2 * model.W)
            vel_a = cfg.momentum * vel_a + lr * g_a
            vel_b = cfg.momentum * vel_b + lr * g_b
            model.W += vel_W
            model.a += vel_a
            model.b += vel_b

            model.decay_fast(cfg.fast_decay)
            model.W_fast += fast_lr * g_W
            model.a_fast += fast_lr * g_a
            model.b_fast += fast_lr * g_b
            update += 1

        fe = float(np.mean(free_energy(model, probe)))
        model.training_log.append({"epoch": epoch + 1, "probe_free_energy": fe})
        log.debug("epoch %d probe free energy %.4f", epoch + 1, fe)
        if callback is not None:
            callback(epoch + 1, model)

    model.W_fast[:] = 0.0
    model.a_fast[:] = 0.0
    model.b_fast[:] = 0.0
    model.W *= keep_v * keep_h
    return model


# ---------------------------------------------------------------------------
# persistence


def _floats(x) -> list:
    return [float(v) for v in np.asarray(x).reshape(-1)]


def model_to_dict(model: RbmModel) -> dict:
    return {
        "format_version": 1,
        "kind": "rbm",
        "r": model.r,
        "q": model.q,
        "W": _floats(model.W),
        "a": _floats(model.a),
        "b": _floats(model.b),
        "seed": int(model.seed),
        "epochs": int(model.epochs),
        "viewpoint_config": model.viewpoint_config,
        "n": model.n,
        "training_log": model.training_log,
    }


def model_from_dict(doc: dict) -> RbmModel:
    if doc.get("format_version") != 1 or doc.get("kind") != "rbm":
        raise ModelFormatError("not a version-1 rbm model document")
    try:
        r, q = int(doc["r"]), int(doc["q"])
        W = np.array(doc["W"], dtype=np.float64).reshape(r, q)
        model = RbmModel(W, doc["a"], doc["b"], seed=doc.get("seed", 0),
                         epochs=doc.get("epochs", 0), n=doc.get("n"),
                         viewpoint_config=doc.get("viewpoint_config"),
                         training_log=doc.get("training_log", []))
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"invalid rbm model document: {exc}") from None
    if not model.is_finite():
        raise ModelFormatError("model parameters are not finite")
    return model


def save_model(model: RbmModel, path) -> None:
    from .io import atomic_write_text
    atomic_write_text(path, json.dumps(model_to_dict(model)) + "\n")


def load_model(path) -> RbmModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)


__all__ = [
    "RbmModel", "TrainConfig", "hidden_probs", "visible_probs", "free_energy",
    "free_energy_grad", "all_configurations", "log_partition", "exact_prob",
    "exact_distribution", "exact_conditional", "exact_conditional_prob",
    "sparsity_penalty", "sparsity_preact_grad", "train_fpcd", "model_to_dict",
    "model_from_dict", "save_model", "load_model",
]
