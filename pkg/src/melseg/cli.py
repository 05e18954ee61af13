"""``melseg`` command-line front end.

Subcommands: train, ic, pseudo, segment, baseline, cv, synth, plot. Every
command is a pure function of its inputs, configuration and seed. Exit codes:
0 success, 1 validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .baselines import PMI, SEGMENTERS, TP, baseline_digram, segment_corpus
from .corpus import boundary_vector, load_corpus, read_melody, write_corpus
from .encoding import DEFAULT_VIEWPOINTS, encode_corpus
from .errors import MelsegError, ValidationError
from .evalharness import PipelineSpec, run_cv, write_report
from .infocontent import corpus_bsps
from .io import (
    atomic_write_text,
    bsp_to_csv,
    read_bsp_csv,
    read_segmentation_csv,
    segmentation_to_csv,
)
from .peakpick import AS_PRINTED, RAW_IC_KS, SMOOTHED_KS, PeakPickConfig, pick_boundaries
from .pseudosup import (
    FineTuneConfig,
    FineTuneLog,
    pretrain_config,
    save_ffnn,
    smoothed_bsp,
    train_pseudo_supervised,
)
from .rbm import TrainConfig, load_model, save_model, train_fpcd
from .sampler import SamplerConfig
from .synth import SynthSpec, generate_synthetic_corpus

log = logging.getLogger("melseg")

SEED_ENV = "MELSEG_SEED"

_PRE = pretrain_config()


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; every default mirrors the module defaults."""
    # n-gram model
    ngram: int = 3
    hidden: int = 200
    epochs: int = TrainConfig.epochs
    batch_size: int = TrainConfig.batch_size
    batch_size_by_ngram: bool = TrainConfig.batch_size_by_ngram
    learning_rate: float = TrainConfig.learning_rate
    momentum: float = TrainConfig.momentum
    fast_lr_start: float = TrainConfig.fast_lr_start
    fast_lr_end: float = TrainConfig.fast_lr_end
    fast_decay: float = TrainConfig.fast_decay
    l2: float = TrainConfig.l2
    sparsity_target: float = TrainConfig.sparsity_target
    sparsity_strength: float = TrainConfig.sparsity_strength
    dropout_hidden: float = TrainConfig.dropout_hidden
    dropout_visible: float = TrainConfig.dropout_visible
    n_chains: int = TrainConfig.n_chains
    init_scale: float = TrainConfig.init_scale
    # sampler
    n_particles: int = SamplerConfig.n_particles
    gibbs_steps: int = SamplerConfig.gibbs_steps
    # peak picking
    k: float = PeakPickConfig.k
    variance: str = AS_PRINTED
    raw_ks: tuple = RAW_IC_KS
    smoothed_ks: tuple = SMOOTHED_KS
    # pseudo-supervision
    ps_hidden: int = 200
    pretrain_epochs: int = _PRE.epochs
    pretrain_learning_rate: float = _PRE.learning_rate
    pretrain_batch_size: int = _PRE.batch_size
    pretrain_l2: float = _PRE.l2
    finetune_epochs: int = FineTuneConfig.epochs
    finetune_batch_size: int = FineTuneConfig.batch_size
    finetune_learning_rate: float = FineTuneConfig.learning_rate
    finetune_momentum: float = FineTuneConfig.momentum
    finetune_l2: float = FineTuneConfig.l2
    finetune_dropout_hidden: float = FineTuneConfig.dropout_hidden
    finetune_dropout_input: float = FineTuneConfig.dropout_input
    second_hidden: int = FineTuneConfig.second_hidden
    # evaluation and plumbing
    folds: int = 5
    seed: int = 0
    threads: int = 1
    corpus: str = ""
    out: str = ""

    @classmethod
    def from_dict(cls, doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        types = {f.name: type(f.default) for f in fields(cls)}
        unknown = sorted(set(doc) - set(types))
        if unknown:
            raise ValidationError(f"unknown config key {unknown[0]!r}")
        values = {}
        for key, val in doc.items():
            want = types[key]
            if want is tuple:
                if not isinstance(val, list) or not all(_is_number(x) for x in val):
                    raise ValidationError(f"config key {key!r} must be a list of numbers")
                val = tuple(float(x) for x in val)
            elif want is float:
                if not _is_number(val):
                    raise ValidationError(f"config key {key!r} must be a number")
                val = float(val)
            elif want is int:
                if isinstance(val, bool) or not isinstance(val, int):
                    raise ValidationError(f"config key {key!r} must be an integer")
            elif not isinstance(val, want):
                raise ValidationError(f"config key {key!r} must be of type {want.__name__}")
            values[key] = val
        return cls(**values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(_read_text(path))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        try:
            return cls.from_dict(doc)
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["raw_ks"] = list(self.raw_ks)
        d["smoothed_ks"] = list(self.smoothed_ks)
        return d

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(self.n_particles, self.gibbs_steps, self.seed)

    def pretrain_config(self) -> TrainConfig:
        return replace(pretrain_config(self.train_config()), epochs=self.pretrain_epochs,
                       learning_rate=self.pretrain_learning_rate,
                       batch_size=self.pretrain_batch_size, l2=self.pretrain_l2)

    def finetune_config(self) -> FineTuneConfig:
        return FineTuneConfig(
            epochs=self.finetune_epochs, batch_size=self.finetune_batch_size,
            learning_rate=self.finetune_learning_rate, momentum=self.finetune_momentum,
            l2=self.finetune_l2, dropout_hidden=self.finetune_dropout_hidden,
            dropout_input=self.finetune_dropout_input, second_hidden=self.second_hidden,
            seed=self.seed)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"{path}: file not found") from None
    except IsADirectoryError:
        raise ValidationError(f"{path}: is a directory") from None


def _require(path, what: str) -> Path:
    if not path:
        raise ValidationError(f"{what} is required (flag or config key)")
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"{p}: file not found")
    return p


def resolve_config(args) -> RunConfig:
    """Config file, then ``MELSEG_SEED``, then explicit flags (highest precedence)."""
    cfg = RunConfig.load(getattr(args, "config", None))
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            cfg = replace(cfg, seed=int(env))
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    overrides = {}
    for name in ("seed", "threads", "ngram", "k", "variance", "folds", "corpus"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    return replace(cfg, **overrides)


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    corpus = load_corpus(_require(cfg.corpus, "--corpus"))
    X = encode_corpus(corpus, cfg.ngram, DEFAULT_VIEWPOINTS, cfg.seed)
    model = train_fpcd(X, cfg.train_config(), q=cfg.hidden, n=cfg.ngram,
                       viewpoint_config=DEFAULT_VIEWPOINTS.to_dict())
    save_model(model, args.out)
    log.info("wrote %s (%d x %d, %d epochs)", args.out, model.r, model.q, model.epochs)
    return 0


def _load_rbm(path):
    _require(path, "--model")
    return load_model(path)


def cmd_ic(args) -> int:
    cfg = resolve_config(args)
    model = _load_rbm(args.model)
    corpus = load_corpus(_require(cfg.corpus, "--corpus"))
    n = model.n or cfg.ngram
    bsps = corpus_bsps(model, corpus, n, cfg.sampler_config(), DEFAULT_VIEWPOINTS, cfg.seed,
                       cfg.threads)
    atomic_write_text(args.out, bsp_to_csv({k: v.values for k, v in bsps.items()}))
    return 0


def cmd_pseudo(args) -> int:
    cfg = resolve_config(args)
    model = _load_rbm(args.model)
    corpus = load_corpus(_require(cfg.corpus, "--corpus"))
    n = model.n or cfg.ngram
    trace = FineTuneLog()
    net, _ = train_pseudo_supervised(model, corpus, n, cfg.sampler_config(),
                                     cfg.pretrain_config(), cfg.finetune_config(),
                                     cfg.ps_hidden, DEFAULT_VIEWPOINTS, cfg.threads,
                                     trace=trace, pad_seed=cfg.seed)
    net.meta = {**net.meta, "mse_trace": trace.mse}
    save_ffnn(net, args.out)
    bsp_out = args.bsp_out or str(Path(args.out).with_suffix("")) + ".bsp.csv"
    smooth = {m.id: smoothed_bsp(net, m, n, cfg.seed).values for m in corpus}
    atomic_write_text(bsp_out, bsp_to_csv(smooth))
    return 0


def cmd_segment(args) -> int:
    cfg = resolve_config(args)
    bsps = read_bsp_csv(_require(args.bsp, "--bsp"))
    pick = PeakPickConfig(cfg.k, cfg.variance)
    atomic_write_text(args.out, segmentation_to_csv(
        {mid: pick_boundaries(v, pick) for mid, v in bsps.items()}))
    return 0


def cmd_baseline(args) -> int:
    corpus = load_corpus(_require(args.corpus, "--corpus"))
    if args.method in SEGMENTERS:
        atomic_write_text(args.out, segmentation_to_csv(segment_corpus(corpus, args.method)))
    else:
        train = load_corpus(args.train_corpus) if args.train_corpus else corpus
        bsps = baseline_digram(train, corpus, args.method)
        atomic_write_text(args.out, bsp_to_csv({k: v.values for k, v in bsps.items()}))
    return 0


def parse_ngram_range(text: str) -> list[int]:
    """``"a..b"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise ValidationError(f"bad n-gram range {text!r}; expected a..b") from None
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad n-gram range {text!r}; need 1 <= a <= b")
    return list(range(lo, hi + 1))


def cmd_cv(args) -> int:
    cfg = resolve_config(args)
    corpus = load_corpus(_require(cfg.corpus, "--corpus"))
    ngrams = parse_ngram_range(args.ngram_range) if args.ngram_range else [cfg.ngram]
    if args.pipeline.startswith("baseline:"):
        ngrams = ngrams[:1]
    report = None
    for n in ngrams:
        spec = PipelineSpec(args.pipeline, n=n, hidden=cfg.hidden, train=cfg.train_config(),
                            sampler=cfg.sampler_config(), pretrain=cfg.pretrain_config(),
                            finetune=cfg.finetune_config(), ps_hidden=cfg.ps_hidden,
                            raw_ks=cfg.raw_ks, smoothed_ks=cfg.smoothed_ks,
                            variance=cfg.variance)
        part = run_cv(corpus, spec, cfg.folds, cfg.seed, cfg.threads)
        report = part if report is None else report.merge(part)
    out = Path(args.out_dir)
    write_report(report, out)
    atomic_write_text(out / "config.json",
                      json.dumps({**cfg.to_dict(), "pipeline": args.pipeline,
                                  "ngrams": ngrams}, indent=1) + "\n")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.load(_require(args.spec, "--spec")) if args.spec else SynthSpec()
    seed = _seed_from(args.seed, 0)
    write_corpus(generate_synthetic_corpus(spec, seed), args.out_dir)
    return 0


def _seed_from(flag, default: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return default


def render_svg(melody, values, truth, pred=None, width: int = 900) -> str:
    """Piano-roll strip above the BSP curve, truth bars and dashed predicted lines."""
    notes = melody.notes
    end = max(n.offset for n in notes)
    left, right = 50, 15
    plot_w = width - left - right
    roll_top, roll_h = 20, 120
    curve_top, curve_h = 170, 180
    height = curve_top + curve_h + 40

    def x(t):
        return left + plot_w * t / max(end, 1)

    lo = min(n.pitch for n in notes)
    hi = max(n.pitch for n in notes)
    span = max(hi - lo + 1, 1)
    vmax = max(float(np.max(values)), 1e-9)

    def y(v):
        return curve_top + curve_h * (1 - v / vmax)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<title>{escape(melody.id)}</title>',
           f'<rect x="{left}" y="{roll_top}" width="{plot_w}" height="{roll_h}" '
           'fill="none" stroke="#999"/>',
           f'<rect x="{left}" y="{curve_top}" width="{plot_w}" height="{curve_h}" '
           'fill="none" stroke="#999"/>']
    for i, n in enumerate(notes):
        if truth[i]:
            out.append(f'<rect x="{x(n.onset) - 2:.2f}" y="{curve_top}" width="4" '
                       f'height="{curve_h}" fill="#cfe3cf"/>')
    row_h = roll_h / span
    for n in notes:
        top = roll_top + roll_h - (n.pitch - lo + 1) * row_h
        out.append(f'<rect x="{x(n.onset):.2f}" y="{top:.2f}" '
                   f'width="{max(x(n.offset) - x(n.onset) - 1, 1):.2f}" '
                   f'height="{max(row_h, 1):.2f}" fill="#335"/>')
    if pred is not None:
        for i, n in enumerate(notes):
            if pred[i]:
                out.append(f'<line x1="{x(n.onset):.2f}" y1="{curve_top}" x2="{x(n.onset):.2f}" '
                           f'y2="{curve_top + curve_h}" stroke="#c33" stroke-dasharray="4 3"/>')
    pts = " ".join(f"{x(n.onset):.2f},{y(v):.2f}" for n, v in zip(notes, values))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#000" stroke-width="1.5"/>')
    out.append(f'<text x="{left - 5}" y="{curve_top + 4}" text-anchor="end">{vmax:.3g}</text>')
    out.append(f'<text x="{left - 5}" y="{curve_top + curve_h}" text-anchor="end">0</text>')
    out.append(f'<text x="{left + plot_w / 2}" y="{height - 8}" text-anchor="middle">'
               'onset (16th notes)</text>')
    out.append(f'<text x="{left - 5}" y="{roll_top + 10}" text-anchor="end">{hi}</text>')
    out.append(f'<text x="{left - 5}" y="{roll_top + roll_h}" text-anchor="end">{lo}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_data_csv(melody, values, truth, pred=None) -> str:
    lines = ["note_index,onset_16th,duration_16th,midi_pitch,bsp,truth,pred"]
    for i, n in enumerate(melody.notes):
        p = "" if pred is None else str(int(pred[i]))
        lines.append(f"{i},{n.onset},{n.duration},{n.pitch},{float(values[i]):.9g},"
                     f"{int(truth[i])},{p}")
    return "\n".join(lines) + "\n"


def _lookup(table: dict, mid: str, path, n: int):
    if mid not in table:
        raise ValidationError(f"{path}: no rows for melody {mid!r}")
    vals = table[mid]
    if len(vals) != n:
        raise ValidationError(f"{path}: melody {mid!r} has {len(vals)} rows, melody has {n} notes")
    return vals


def cmd_plot(args) -> int:
    melody = read_melody(_require(args.melody, "--melody"))
    n = len(melody)
    values = _lookup(read_bsp_csv(_require(args.bsp, "--bsp")), melody.id, args.bsp, n)
    if args.truth:
        truth = _lookup(read_segmentation_csv(_require(args.truth, "--truth")), melody.id,
                        args.truth, n)
    else:
        truth = boundary_vector(melody)
    pred = None
    if args.pred:
        pred = _lookup(read_segmentation_csv(_require(args.pred, "--pred")), melody.id,
                       args.pred, n)
    atomic_write_text(args.out, render_svg(melody, values, truth, pred))
    atomic_write_text(str(Path(args.out).with_suffix(".csv")),
                      plot_data_csv(melody, values, truth, pred))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_D = RunConfig()


def _common(p, *, config=True, seed=True, threads=True):
    if config:
        p.add_argument("--config", help="flat JSON run configuration (default: built-in values)")
    if seed:
        p.add_argument("--seed", type=int,
                       help=f"master seed; overrides ${SEED_ENV} and the config "
                            f"(default: {_D.seed})")
    if threads:
        p.add_argument("--threads", type=int,
                       help=f"worker threads; results do not depend on it (default: {_D.threads})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="melseg", description="Melody phrase segmentation from RBM "
                     "information content.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train an RBM n-gram model")
    p.add_argument("--corpus", help="corpus manifest or directory (default: config 'corpus')")
    p.add_argument("--ngram", type=int, help=f"n-gram length (default: {_D.ngram})")
    p.add_argument("--out", required=True, help="model JSON file to write (required)")
    _common(p, threads=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ic", help="per-note information content (BSP CSV)")
    p.add_argument("--model", required=True, help="RBM model file (required)")
    p.add_argument("--corpus", help="corpus manifest or directory (default: config 'corpus')")
    p.add_argument("--out", required=True, help="BSP CSV to write (required)")
    _common(p)
    p.set_defaults(func=cmd_ic)

    p = sub.add_parser("pseudo", help="pseudo-supervised smoothing network")
    p.add_argument("--model", required=True, help="RBM model file (required)")
    p.add_argument("--corpus", help="corpus manifest or directory (default: config 'corpus')")
    p.add_argument("--out", required=True, help="network JSON file to write (required)")
    p.add_argument("--bsp-out", help="smoothed BSP CSV (default: <out without suffix>.bsp.csv)")
    _common(p)
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("segment", help="peak-pick boundaries from a BSP CSV")
    p.add_argument("--bsp", required=True, help="BSP CSV (required)")
    p.add_argument("--k", type=float, help=f"threshold multiplier (default: {_D.k})")
    p.add_argument("--variance", choices=["as-printed", "standard-weighted"],
                   help=f"spread formula (default: {_D.variance})")
    p.add_argument("--out", required=True, help="segmentation CSV to write (required)")
    _common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("baseline", help="reference segmenters")
    p.add_argument("--method", required=True, choices=sorted(SEGMENTERS) + [TP, PMI],
                   help="always, never, gpr2a (segmentation CSV) or tp, pmi (BSP CSV) (required)")
    p.add_argument("--corpus", required=True, help="corpus manifest or directory (required)")
    p.add_argument("--train-corpus",
                   help="corpus for digram statistics (default: the evaluated corpus)")
    p.add_argument("--out", required=True, help="CSV to write (required)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("cv", help="cross-validated evaluation")
    p.add_argument("--corpus", help="corpus manifest or directory (default: config 'corpus')")
    p.add_argument("--pipeline", default="rbm",
                   help="rbm, rbm+ps or baseline:<always|never|gpr2a|tp|pmi> (default: rbm)")
    p.add_argument("--ngram-range", help=f"n-gram lengths a..b (default: {_D.ngram}..{_D.ngram})")
    p.add_argument("--folds", type=int, help=f"number of folds (default: {_D.folds})")
    p.add_argument("--variance", choices=["as-printed", "standard-weighted"],
                   help=f"spread formula (default: {_D.variance})")
    p.add_argument("--out-dir", required=True, help="report directory (required)")
    _common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--spec", help="synthetic corpus spec JSON (default: built-in spec)")
    p.add_argument("--seed", type=int, help=f"generator seed; overrides ${SEED_ENV} (default: 0)")
    p.add_argument("--out-dir", required=True, help="directory for CSVs and manifest (required)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plot", help="SVG of one melody's BSP with boundaries")
    p.add_argument("--bsp", required=True, help="BSP CSV (required)")
    p.add_argument("--melody", required=True, help="melody CSV; its file stem is the id (required)")
    p.add_argument("--truth", help="segmentation CSV (default: the melody's annotation)")
    p.add_argument("--pred", help="predicted segmentation CSV (default: none)")
    p.add_argument("--out", required=True, help="SVG file; data CSV is written beside it "
                   "(required)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"melseg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (MelsegError, ArithmeticError, OSError) as exc:
        print(f"melseg {args.command}: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
