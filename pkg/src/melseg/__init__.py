"""Melody phrase segmentation from RBM information content.

Typical flow: ``load_corpus`` -> ``encode_corpus`` -> ``train_fpcd`` ->
``corpus_bsps`` (per-note IC) -> optional ``train_pseudo_supervised`` ->
``pick_boundaries``; ``run_cv`` wraps it all in cross-validation.
"""
__version__ = "0.1.0"

from .corpus import Corpus, Melody, NoteEvent, boundary_vector, load_corpus, parse_melody
from .encoding import DEFAULT_VIEWPOINTS, NGramBatch, ViewpointConfig, encode_corpus, encode_melody
from .errors import MelsegError, ValidationError
from .evalharness import EvalReport, FoldPlan, PipelineSpec, emit_report, run_cv, write_report
from .infocontent import Bsp, bsp_for_melody, corpus_bsps, information_content
from .metrics import Counts, boundary_counts, prf1
from .peakpick import PeakPickConfig, pick_boundaries, sweep_k
from .pseudosup import FfnnModel, FineTuneConfig, smoothed_bsp, train_pseudo_supervised
from .rbm import RbmModel, TrainConfig, load_model, save_model, train_fpcd
from .sampler import SamplerConfig, estimate_conditional, estimate_prob
from .synth import SynthSpec, generate_synthetic_corpus

__all__ = [
    "Bsp", "Corpus", "Counts", "DEFAULT_VIEWPOINTS", "EvalReport", "FfnnModel", "FineTuneConfig",
    "FoldPlan", "Melody", "MelsegError", "NGramBatch", "NoteEvent", "PeakPickConfig",
    "PipelineSpec", "RbmModel", "SamplerConfig", "SynthSpec", "TrainConfig", "ValidationError",
    "ViewpointConfig", "boundary_counts", "boundary_vector", "bsp_for_melody", "corpus_bsps",
    "emit_report", "encode_corpus", "encode_melody", "estimate_conditional", "estimate_prob",
    "generate_synthetic_corpus", "information_content", "load_corpus", "load_model",
    "parse_melody", "pick_boundaries", "prf1", "run_cv", "save_model", "smoothed_bsp",
    "sweep_k", "train_fpcd", "train_pseudo_supervised", "write_report",
]
