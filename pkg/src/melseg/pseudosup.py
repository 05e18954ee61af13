"""Pseudo-supervised smoothing of information-content profiles.

A feed-forward network (sigmoid hidden layer initialized from an RBM,
single linear output) is regressed onto the RBM's per-note IC values,
using only the n-gram bits as input. Its outputs form a smoothed
boundary-strength profile.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .corpus import Corpus, Melody
from .encoding import DEFAULT_VIEWPOINTS, NGramBatch, ViewpointConfig, encode_melody
from .errors import (
    ConfigMismatch,
    EmptyInput,
    LengthMismatch,
    ModelFormatError,
    NonFiniteLoss,
    NonPositiveBeta,
)
from .infocontent import Bsp, check_model_config, corpus_bsps
from .rbm import RbmModel, TrainConfig, model_to_dict, train_fpcd
from .rng import keyed_rng
from .sampler import SamplerConfig

log = logging.getLogger(__name__)


@dataclass
class FfnnModel:
    weights: list          # layer l: (in_l, out_l)
    biases: list           # layer l: (out_l,)
    n: int | None = None
    viewpoint_config: dict | None = None
    source_rbm_id: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ModelFormatError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ModelFormatError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ModelFormatError(f"layer {i}: input size does not match previous layer")
        if self.weights[-1].shape[1] != 1:
            raise ModelFormatError("output layer must have exactly one unit")

    @property
    def layers(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "FfnnModel":
        return FfnnModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.n, self.viewpoint_config, self.source_rbm_id, dict(self.meta))

    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases


def forward(model: FfnnModel, X, masks=None):
    """Activations of every layer; the last entry is the (R,) linear output.

    ``masks`` optionally holds one multiplicative mask per layer input
    (input layer first), already divided by the keep probability.
    """
    acts = [np.atleast_2d(np.asarray(X, dtype=np.float64))]
    L = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        x = acts[-1] if masks is None or masks[i] is None else acts[-1] * masks[i]
        z = x @ w + b
        acts.append(z if i == L - 1 else expit(z))
    return acts


def predict(model: FfnnModel, X) -> np.ndarray:
    return forward(model, X)[-1][:, 0]


def loss_and_grads(model: FfnnModel, X, targets, l2: float = 0.0, masks=None):
    """Sum of squared errors (+ l2/2 * sum of squared weights) and its gradients.

    Biases are not decayed.

    Returns:
        ``(loss, weight_grads, bias_grads)``.
    """
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    acts = forward(model, X, masks)
    y = acts[-1][:, 0]
    resid = y - t
    loss = float(np.sum(resid ** 2))
    if l2:
        loss += 0.5 * l2 * sum(float(np.sum(w ** 2)) for w in model.weights)
    delta = 2.0 * resid[:, None]
    gW = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        x = acts[i] if masks is None or masks[i] is None else acts[i] * masks[i]
        gW[i] = x.T @ delta + l2 * model.weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            back = delta @ model.weights[i].T
            if masks is not None and masks[i] is not None:
                back = back * masks[i]
            delta = back * acts[i] * (1 - acts[i])
    return loss, gW, gb


# ---------------------------------------------------------------------------


@dataclass
class FineTuneConfig:
    epochs: int = 100
    batch_size: int = 250
    learning_rate: float = 0.005
    momentum: float = 0.6
    l2: float = 0.01
    dropout_hidden: float = 0.5
    dropout_input: float = 0.2
    second_hidden: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.momentum < 0 or self.l2 < 0:
            raise ValueError("rates must be >= 0")
        for name in ("dropout_hidden", "dropout_input"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must be in [0, 1)")


def pretrain_config(base: TrainConfig | None = None) -> TrainConfig:
    """Hidden-layer pretraining settings: lr 0.005, fixed batch 250, L2 0.01."""
    base = base or TrainConfig()
    return replace(base, learning_rate=0.005, batch_size=250, batch_size_by_ngram=False, l2=0.01)


def pretrain_hidden(data, size: int = 200, cfg: TrainConfig | None = None, n: int | None = None,
                    viewpoint_config: dict | None = None) -> RbmModel:
    """RBM trained on the n-gram rows; its W and hidden bias seed the FFNN hidden layer."""
    cfg = pretrain_config() if cfg is None else cfg
    return train_fpcd(data, cfg, q=size, n=n, viewpoint_config=viewpoint_config)


def build_ffnn(hidden: RbmModel, targets=None, second_hidden: int = 0,
               seed: int = 0, source_rbm_id: str | None = None) -> FfnnModel:
    """Stack a pretrained hidden layer under a linear output unit.

    The output bias starts at the mean target so fine-tuning begins from
    the best constant predictor.
    """
    rng = keyed_rng(seed, "ffnn-init")
    weights = [hidden.W.copy()]
    biases = [hidden.b.copy()]
    width = hidden.q
    if second_hidden:
        weights.append(rng.normal(0, 0.01, (width, second_hidden)))
        biases.append(np.zeros(second_hidden))
        width = second_hidden
    weights.append(rng.normal(0, 0.01, (width, 1)))
    mean = float(np.mean(targets)) if targets is not None and len(targets) else 0.0
    biases.append(np.array([mean]))
    return FfnnModel(weights, biases, hidden.n, hidden.viewpoint_config, source_rbm_id)


@dataclass
class FineTuneLog:
    mse: list = field(default_factory=list)          # full-data MSE after each epoch
    beta: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    rejected_epochs: list = field(default_factory=list)


def finetune(ffnn: FfnnModel, X, targets, cfg: FineTuneConfig = FineTuneConfig(),
             trace: FineTuneLog | None = None) -> FfnnModel:
    """Mini-batch backpropagation on the summed squared error.

    Momentum, L2 weight decay and (inverted) dropout on the input and hidden
    layers; the learning rate is annealed linearly to zero. After each epoch
    the full-data MSE (no dropout) is measured and the best parameters so far
    are kept; the trace records the MSE of that retained model, so it never
    increases. Epochs that do not improve on it are listed in
    ``rejected_epochs``. A non-finite loss restarts from the retained
    parameters with half the learning rate.
    """
    X = np.asarray(getattr(X, "rows", X), dtype=np.float64)
    t = np.asarray(getattr(targets, "targets", targets), dtype=np.float64).reshape(-1)
    if len(X) != len(t):
        raise LengthMismatch(f"{len(X)} rows but {len(t)} targets")
    if len(t) == 0:
        raise EmptyInput("no training rows")
    model = ffnn.copy()
    trace = FineTuneLog() if trace is None else trace
    rng = keyed_rng(cfg.seed, "finetune")
    N = len(t)
    bs = min(cfg.batch_size, N)
    n_batches = math.ceil(N / bs)
    total = max(cfg.epochs * n_batches, 1)
    keeps = [1.0 - cfg.dropout_input] + [1.0 - cfg.dropout_hidden] * (len(model.weights) - 1)

    def full_mse(m):
        return float(np.mean((predict(m, X) - t) ** 2))

    current = full_mse(model)
    if not math.isfinite(current):
        raise NonFiniteLoss("initial loss is not finite")
    best = [p.copy() for p in model.params()]
    vel = [np.zeros_like(p) for p in model.params()]
    scale = 1.0
    update = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(N)
        diverged = False
        for bi in range(n_batches):
            lr = scale * cfg.learning_rate * (1.0 - update / total)
            update += 1
            if diverged:
                continue
            idx = order[bi * bs:(bi + 1) * bs]
            masks = []
            for li, keep in enumerate(keeps):
                width = model.weights[li].shape[0]
                masks.append(None if keep >= 1.0 else
                             (rng.random((len(idx), width)) < keep) / keep)
            with np.errstate(over="ignore", invalid="ignore"):
                loss, gW, gb = loss_and_grads(model, X[idx], t[idx], cfg.l2, masks)
            if not math.isfinite(loss):
                diverged = True
                continue
            for j, (p, g) in enumerate(zip(model.params(), gW + gb)):
                vel[j] = cfg.momentum * vel[j] - lr * g
                p += vel[j]
        with np.errstate(over="ignore", invalid="ignore"):
            new = math.inf if diverged else full_mse(model)
        if diverged or not math.isfinite(new):
            # restart from the best parameters with a smaller step
            for p, b in zip(model.params(), best):
                p[...] = b
            vel = [np.zeros_like(p) for p in model.params()]
            scale *= 0.5
            trace.rejected_epochs.append(epoch + 1)
        elif new <= current:
            current = new
            best = [p.copy() for p in model.params()]
        else:
            trace.rejected_epochs.append(epoch + 1)
        trace.mse.append(current)
        beta = precision_beta_from_mse(current, N)
        trace.beta.append(beta)
        trace.entropy.append(gaussian_entropy(beta) if math.isfinite(beta) else -math.inf)
    for p, b in zip(model.params(), best):
        p[...] = b
    model.meta = {**model.meta, "finetune_epochs": cfg.epochs, "final_mse": current,
                  "rejected_epochs": list(trace.rejected_epochs)}
    return model


def precision_beta_from_mse(mse: float, n: int) -> float:
    sse = mse * n
    return math.inf if sse == 0 else n / sse


# ---------------------------------------------------------------------------


def precision_beta(targets, outputs) -> float:
    """N / sum (t_i - y_i)^2; ``math.inf`` when the fit is perfect."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    y = np.asarray(outputs, dtype=np.float64).reshape(-1)
    if len(t) == 0:
        raise EmptyInput("precision needs at least one target")
    if len(t) != len(y):
        raise LengthMismatch(f"{len(t)} targets vs {len(y)} outputs")
    sse = float(np.sum((t - y) ** 2))
    return math.inf if sse == 0 else len(t) / sse


def gaussian_entropy(beta: float) -> float:
    """Differential entropy (nats) of a Gaussian with precision ``beta``."""
    if not (beta > 0 and math.isfinite(beta)):
        raise NonPositiveBeta(f"beta must be positive and finite, got {beta}")
    return 0.5 * math.log(2 * math.pi / beta) + 0.5


# ---------------------------------------------------------------------------


def model_id(model: RbmModel) -> str:
    doc = model_to_dict(model)
    doc.pop("training_log", None)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PseudoTargets:
    batch: NGramBatch
    targets: np.ndarray
    source_model_id: str

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if len(self.targets) != len(self.batch):
            raise LengthMismatch("targets and n-gram rows are not aligned")
        if np.any(self.targets < 0):
            raise ValueError("pseudo-targets must be non-negative")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def rows(self) -> np.ndarray:
        return self.batch.rows


def make_pseudo_targets(rbm: RbmModel, corpus: Corpus, n: int,
                        cfg: SamplerConfig = SamplerConfig(),
                        viewpoints: ViewpointConfig = DEFAULT_VIEWPOINTS,
                        pad_seed: int | None = None, threads: int = 1,
                        bsps: dict | None = None) -> PseudoTargets:
    """IC of every note under ``rbm``, aligned with the encoded n-gram rows.

    Precomputed ``bsps`` (melody id -> Bsp from the same model and seeds)
    are reused instead of sampling again.
    """
    check_model_config(rbm, n, viewpoints)
    seed = cfg.seed if pad_seed is None else pad_seed
    if bsps is None:
        bsps = corpus_bsps(rbm, corpus, n, cfg, viewpoints, seed, threads)
    batches = [encode_melody(m, n, viewpoints, seed) for m in corpus]
    rows = np.concatenate([b.rows for b in batches])
    ids = [mid for b in batches for mid in b.melody_ids]
    batch = NGramBatch(n, rows, ids, np.concatenate([b.note_index for b in batches]),
                       np.concatenate([b.padded for b in batches]), viewpoints.note_width)
    targets = np.concatenate([bsps[m.id].values for m in corpus])
    return PseudoTargets(batch, targets, model_id(rbm))


def smoothed_bsp(ffnn: FfnnModel, melody: Melody, n: int, seed: int = 0,
                 viewpoints: ViewpointConfig = DEFAULT_VIEWPOINTS) -> Bsp:
    """Network output per note, clamped at zero."""
    if ffnn.n is not None and ffnn.n != n:
        raise ConfigMismatch(f"network was trained on {ffnn.n}-grams, requested n={n}")
    if ffnn.layers[0] != n * viewpoints.note_width:
        raise ConfigMismatch(f"network input width {ffnn.layers[0]} does not fit {n}-grams")
    rows = encode_melody(melody, n, viewpoints, seed).rows
    return Bsp(melody.id, np.maximum(predict(ffnn, rows), 0.0))


def train_pseudo_supervised(rbm: RbmModel, corpus: Corpus, n: int,
                            sampler: SamplerConfig = SamplerConfig(),
                            pretrain: TrainConfig | None = None,
                            tune: FineTuneConfig = FineTuneConfig(),
                            hidden: int = 200,
                            viewpoints: ViewpointConfig = DEFAULT_VIEWPOINTS,
                            threads: int = 1, bsps: dict | None = None,
                            trace: FineTuneLog | None = None, pad_seed: int | None = None):
    """Pseudo-targets from ``rbm``, hidden-layer pretraining, then fine-tuning.

    Returns:
        ``(ffnn, pseudo_targets)``.
    """
    targets = make_pseudo_targets(rbm, corpus, n, sampler, viewpoints, pad_seed,
                                  threads=threads, bsps=bsps)
    hidden_rbm = pretrain_hidden(targets.rows, hidden, pretrain, n, viewpoints.to_dict())
    net = build_ffnn(hidden_rbm, targets.targets, tune.second_hidden, tune.seed,
                     targets.source_model_id)
    net = finetune(net, targets.rows, targets.targets, tune, trace)
    return net, targets


def ffnn_to_dict(model: FfnnModel) -> dict:
    return {
        "format_version": 1,
        "kind": "ffnn",
        "layers": model.layers,
        "W": [[float(x) for x in w.reshape(-1)] for w in model.weights],
        "b": [[float(x) for x in b] for b in model.biases],
        "source_rbm_id": model.source_rbm_id,
        "n": model.n,
        "viewpoint_config": model.viewpoint_config,
        "meta": model.meta,
    }


def ffnn_from_dict(doc: dict) -> FfnnModel:
    if doc.get("format_version") != 1 or doc.get("kind") != "ffnn":
        raise ModelFormatError("not a version-1 ffnn model document")
    try:
        sizes = [int(s) for s in doc["layers"]]
        weights = [np.array(w, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
                   for i, w in enumerate(doc["W"])]
        return FfnnModel(weights, doc["b"], doc.get("n"), doc.get("viewpoint_config"),
                         doc.get("source_rbm_id"), doc.get("meta", {}))
    except (KeyError, ValueError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"invalid ffnn model document: {exc}") from None


def save_ffnn(model: FfnnModel, path) -> None:
    from .io import atomic_write_text
    atomic_write_text(path, json.dumps(ffnn_to_dict(model)) + "\n")


def load_ffnn(path) -> FfnnModel:
    with open(path, encoding="utf-8") as fh:
        try:
            return ffnn_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from None
