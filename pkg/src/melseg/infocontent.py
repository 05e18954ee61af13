"""Information content of notes and per-melody boundary-strength profiles (BSPs)."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Melody
from .encoding import DEFAULT_VIEWPOINTS, ViewpointConfig, encode_melody
from .errors import ConfigMismatch, NonPositiveProbability, ValidationError
from .rbm import RbmModel
from .sampler import SamplerConfig, conditional_note_probs


@dataclass(frozen=True)
class Bsp:
    melody_id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValidationError("BSP values must be one-dimensional")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError(f"BSP for {self.melody_id!r} has negative or non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def information_content(p) -> float | np.ndarray:
    """log2(1/p) in bits."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~(arr > 0)) or np.any(arr > 1):
        raise NonPositiveProbability(f"probability must be in (0, 1], got {p}")
    ic = -np.log2(arr)
    # -log2(1.0) is -0.0
    ic = ic + 0.0
    return float(ic) if ic.ndim == 0 else ic


def check_model_config(model: RbmModel, n: int, cfg: ViewpointConfig) -> None:
    if model.n is not None and model.n != n:
        raise ConfigMismatch(f"model was trained on {model.n}-grams, requested n={n}")
    if model.viewpoint_config is not None and model.viewpoint_config != cfg.to_dict():
        raise ConfigMismatch("model viewpoint configuration differs from the requested one")
    if model.r != n * cfg.note_width:
        raise ConfigMismatch(f"model has {model.r} visible units, {n}-grams need {n * cfg.note_width}")


def bsp_for_melody(model: RbmModel, melody: Melody, n: int,
                   cfg: SamplerConfig = SamplerConfig(),
                   viewpoints: ViewpointConfig = DEFAULT_VIEWPOINTS,
                   pad_seed: int | None = None) -> Bsp:
    """IC of every note given its n-1 predecessors, estimated with clamped sampling.

    Noise padding uses ``pad_seed`` (defaults to the sampler seed); the
    sampler stream is keyed by the melody id, so each melody's profile is
    independent of which other melodies are processed alongside it.
    """
    check_model_config(model, n, viewpoints)
    seed = cfg.seed if pad_seed is None else pad_seed
    batch = encode_melody(melody, n, viewpoints, seed)
    p = conditional_note_probs(model, batch.rows, n, cfg, key=("bsp", melody.id))
    return Bsp(melody.id, information_content(p))


def corpus_bsps(model: RbmModel, corpus: Corpus, n: int, cfg: SamplerConfig = SamplerConfig(),
                viewpoints: ViewpointConfig = DEFAULT_VIEWPOINTS, pad_seed: int | None = None,
                threads: int = 1) -> dict[str, Bsp]:
    """BSPs for every melody, in corpus order. ``threads`` only changes speed."""
    def one(m):
        return bsp_for_melody(model, m, n, cfg, viewpoints, pad_seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, corpus.melodies))
    else:
        results = [one(m) for m in corpus.melodies]
    return {b.melody_id: b for b in results}
