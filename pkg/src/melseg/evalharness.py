"""Cross-validated evaluation of segmentation pipelines and report emission.

Thresholds are chosen per model and n-gram length to maximize F1 on the
evaluated (test) output, following the published protocol. This is an
optimistic, oracle-style selection and reports say so.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import (
    PMI,
    REFERENCE_ROWS,
    TP,
    baseline_digram,
    segment_corpus,
)
from .corpus import Corpus, boundary_vector
from .encoding import DEFAULT_VIEWPOINTS, encode_corpus
from .errors import FoldTooSmall, ValidationError
from .infocontent import corpus_bsps
from .io import atomic_write_text
from .metrics import Counts, boundary_counts, prf1
from .peakpick import AS_PRINTED, RAW_IC_KS, SMOOTHED_KS, sweep_k
from .pseudosup import FineTuneConfig, FineTuneLog, pretrain_config, smoothed_bsp, train_pseudo_supervised
from .rbm import TrainConfig, train_fpcd
from .rng import derive_seed, text_key
from .sampler import SamplerConfig

log = logging.getLogger(__name__)

__all__ = ["prf1", "FoldPlan", "PipelineSpec", "EvalReport", "run_cv", "emit_report",
           "write_report"]

RULE_BASELINES = ("always", "never", "gpr2a")
DIGRAM_BASELINES = (TP, PMI)
OPTIMISTIC_NOTE = ("k is selected to maximize F1 on the evaluated folds themselves "
                   "(oracle threshold, optimistic)")


@dataclass(frozen=True)
class FoldPlan:
    """Melody-to-fold assignment.

    Melodies are ranked by a seeded hash of their id and dealt round-robin,
    so the partition depends only on the id set and the seed (never on
    corpus order) and every fold is nonempty when there are at least as
    many melodies as folds.
    """
    folds: int
    assignment: dict

    @classmethod
    def make(cls, ids, folds: int = 5, seed: int = 0) -> "FoldPlan":
        ids = list(ids)
        if folds < 2:
            raise ValueError("need at least two folds")
        if len(ids) < folds:
            raise FoldTooSmall(f"{len(ids)} melodies cannot fill {folds} folds")
        ranked = sorted(ids, key=lambda i: (text_key(f"{seed}:{i}"), i))
        return cls(folds, {mid: r % folds for r, mid in enumerate(ranked)})

    def test_ids(self, fold: int, ids) -> list[str]:
        return [i for i in ids if self.assignment[i] == fold]

    def train_ids(self, fold: int, ids) -> list[str]:
        return [i for i in ids if self.assignment[i] != fold]


@dataclass
class PipelineSpec:
    kind: str                      # "rbm", "rbm+ps" or "baseline:<name>"
    n: int = 3
    hidden: int = 200
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    pretrain: TrainConfig | None = None
    finetune: FineTuneConfig = field(default_factory=FineTuneConfig)
    ps_hidden: int = 200
    raw_ks: tuple = RAW_IC_KS
    smoothed_ks: tuple = SMOOTHED_KS
    variance: str = AS_PRINTED

    def __post_init__(self):
        if self.kind.startswith("baseline:"):
            name = self.baseline
            if name not in RULE_BASELINES + DIGRAM_BASELINES:
                raise ValidationError(f"unknown baseline {name!r}")
        elif self.kind not in ("rbm", "rbm+ps"):
            raise ValidationError(f"unknown pipeline {self.kind!r}")
        if self.n < 1:
            raise ValidationError("n must be >= 1")

    @property
    def baseline(self) -> str | None:
        return self.kind.split(":", 1)[1] if self.kind.startswith("baseline:") else None


@dataclass
class FoldResult:
    model: str
    ngram: int | None
    k: float | None
    fold: int
    counts: Counts


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)            # FoldResult
    predictions: dict = field(default_factory=dict)     # (model, ngram, k) -> {id: vector}
    bsps: dict = field(default_factory=dict)            # (model, ngram) -> {id: values}
    truth: dict = field(default_factory=dict)           # id -> vector
    rests: dict = field(default_factory=dict)           # id -> rest gaps
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def merge(self, other: "EvalReport") -> "EvalReport":
        self.rows.extend(other.rows)
        for mine, theirs in ((self.predictions, other.predictions), (self.bsps, other.bsps)):
            for key, per_id in theirs.items():
                mine.setdefault(key, {}).update(per_id)
        self.truth.update(other.truth)
        self.rests.update(other.rests)
        self.diagnostics.update(other.diagnostics)
        for n in other.notes:
            if n not in self.notes:
                self.notes.append(n)
        return self

    def models(self) -> list[tuple]:
        seen = []
        for r in self.rows:
            key = (r.model, r.ngram)
            if key not in seen:
                seen.append(key)
        return seen

    def pooled(self, model: str, ngram, k) -> Counts:
        total = Counts(0, 0, 0)
        for r in self.rows:
            if r.model == model and r.ngram == ngram and r.k == k:
                total = total + r.counts
        return total

    def ks(self, model: str, ngram) -> list:
        out = []
        for r in self.rows:
            if r.model == model and r.ngram == ngram and r.k not in out:
                out.append(r.k)
        return out

    def best_k(self, model: str, ngram):
        """F1-maximizing threshold on counts pooled over folds; ties go to the smaller k."""
        ks = self.ks(model, ngram)
        if ks == [None]:
            return None
        best = None
        for k in sorted(ks):
            if best is None or self.pooled(model, ngram, k).f1 > self.pooled(model, ngram, best).f1:
                best = k
        return best

    def best(self, model: str, ngram) -> Counts:
        return self.pooled(model, ngram, self.best_k(model, ngram))

    def summary(self) -> list[dict]:
        out = []
        for model, ngram in self.models():
            k = self.best_k(model, ngram)
            c = self.pooled(model, ngram, k)
            out.append({"model": model, "ngram": ngram, "k": k, "precision": c.precision,
                        "recall": c.recall, "f1": c.f1, "tp": c.tp, "fp": c.fp, "fn": c.fn})
        return out

    def rest_split(self, model: str, ngram) -> dict[str, Counts]:
        """Counts at the best k restricted to notes with / without a preceding rest."""
        k = self.best_k(model, ngram)
        preds = self.predictions.get((model, ngram, k), {})
        out = {"rest": Counts(0, 0, 0), "no-rest": Counts(0, 0, 0)}
        for mid, p in preds.items():
            t = self.truth[mid]
            has_rest = self.rests[mid] > 0
            out["rest"] = out["rest"] + boundary_counts(p[has_rest], t[has_rest])
            out["no-rest"] = out["no-rest"] + boundary_counts(p[~has_rest], t[~has_rest])
        return out


def _fold_seeds(master_seed: int, fold: int) -> dict:
    return {name: derive_seed(master_seed, "fold", fold, name)
            for name in ("pad", "train", "sampler", "pretrain", "finetune")}


def _eval_profiles(report_rows, preds_out, model, ngram, fold, bsps, truth, ks, variance):
    sweep = sweep_k(bsps, truth, ks, variance)
    for k in sorted(sweep.table):
        report_rows.append(FoldResult(model, ngram, k, fold, sweep.table[k]))
        preds_out.setdefault((model, ngram, k), {}).update(sweep.predictions[k])


def _run_fold(corpus: Corpus, plan: FoldPlan, fold: int, spec: PipelineSpec,
              master_seed: int) -> EvalReport:
    ids = corpus.ids
    test = corpus.subset(plan.test_ids(fold, ids))
    train = corpus.subset(plan.train_ids(fold, ids))
    truth = {m.id: boundary_vector(m) for m in test}
    rep = EvalReport(truth=truth, rests={m.id: m.rests() for m in test})
    seeds = _fold_seeds(master_seed, fold)
    n = spec.n

    name = spec.baseline
    if name in RULE_BASELINES:
        preds = segment_corpus(test, name)
        rep.rows.append(FoldResult(name, None, None, fold, boundary_counts(preds, truth)))
        rep.predictions[(name, None, None)] = preds
        return rep
    if name in DIGRAM_BASELINES:
        bsps = {k: v.values for k, v in baseline_digram(train, test, name).items()}
        rep.bsps[(name, 2)] = bsps
        _eval_profiles(rep.rows, rep.predictions, name, 2, fold, bsps, truth,
                       spec.raw_ks, spec.variance)
        return rep

    vp = DEFAULT_VIEWPOINTS
    train_cfg = _with_seed(spec.train, seeds["train"])
    sampler = SamplerConfig(spec.sampler.n_particles, spec.sampler.gibbs_steps, seeds["sampler"])
    X = encode_corpus(train, n, vp, seeds["pad"])
    rbm = train_fpcd(X, train_cfg, q=spec.hidden, n=n, viewpoint_config=vp.to_dict())
    raw = corpus_bsps(rbm, test, n, sampler, vp, seeds["pad"])
    raw_vals = {k: v.values for k, v in raw.items()}
    rep.bsps[("rbm", n)] = raw_vals
    _eval_profiles(rep.rows, rep.predictions, "rbm", n, fold, raw_vals, truth,
                   spec.raw_ks, spec.variance)
    rep.diagnostics[f"rbm/n={n}/fold={fold}/probe_free_energy"] = [
        e["probe_free_energy"] for e in rbm.training_log]

    if spec.kind == "rbm+ps":
        pre = _with_seed(spec.pretrain or pretrain_config(spec.train), seeds["pretrain"])
        tune = _with_seed(spec.finetune, seeds["finetune"])
        trace = FineTuneLog()
        net, _ = train_pseudo_supervised(rbm, train, n, sampler, pre, tune, spec.ps_hidden,
                                         vp, trace=trace, pad_seed=seeds["pad"])
        smooth = {m.id: smoothed_bsp(net, m, n, seeds["pad"], vp).values for m in test}
        rep.bsps[("rbm+ps", n)] = smooth
        _eval_profiles(rep.rows, rep.predictions, "rbm+ps", n, fold, smooth, truth,
                       spec.smoothed_ks, spec.variance)
        raised = lowered = same = 0
        for mid, t in truth.items():
            starts = test[mid].phrase_starts.astype(bool)
            starts[0] = False
            d = smooth[mid][starts] - raw_vals[mid][starts]
            raised += int(np.sum(d > 0))
            lowered += int(np.sum(d < 0))
            same += int(np.sum(d == 0))
        key = f"rbm+ps/n={n}/fold={fold}"
        rep.diagnostics[key] = {
            "mse": trace.mse, "beta": trace.beta, "entropy": trace.entropy,
            "rejected_epochs": trace.rejected_epochs,
            "boundary_ic_raised": raised, "boundary_ic_lowered": lowered,
            "boundary_ic_unchanged": same,
        }
    return rep


def _with_seed(cfg, seed):
    return replace(cfg, seed=seed)


def run_cv(corpus: Corpus, spec: PipelineSpec, folds: int = 5, master_seed: int = 0,
           threads: int = 1) -> EvalReport:
    """K-fold cross-validation of one pipeline at one n-gram length.

    Every fold derives its seeds from ``(master_seed, fold)``; with
    ``threads > 1`` folds run concurrently and the merged report is
    identical to the sequential one.
    """
    plan = FoldPlan.make(corpus.ids, folds, master_seed)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, folds)) as pool:
            parts = list(pool.map(lambda f: _run_fold(corpus, plan, f, spec, master_seed),
                                  range(folds)))
    else:
        parts = [_run_fold(corpus, plan, f, spec, master_seed) for f in range(folds)]
    report = EvalReport()
    for p in parts:
        report.merge(p)
    if spec.kind in ("rbm", "rbm+ps") or spec.baseline in DIGRAM_BASELINES:
        report.notes.append(OPTIMISTIC_NOTE)
    return report


# ---------------------------------------------------------------------------
# report emission


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_csv(report: EvalReport) -> str:
    lines = ["model,ngram,k,fold,precision,recall,f1"]
    for r in report.rows:
        c = r.counts
        lines.append(",".join([r.model, _num(r.ngram), _num(r.k), str(r.fold),
                               repr(c.precision), repr(c.recall), repr(c.f1)]))
    return "\n".join(lines) + "\n"


def _sorted_summary(report: EvalReport) -> list[dict]:
    rows = []
    for s in report.summary():
        label = s["model"] if s["ngram"] is None else f"{s['model']}{s['ngram']}"
        rows.append({**s, "name": label, "source": "computed"})
    for name, p, r, f in REFERENCE_ROWS:
        rows.append({"name": name, "model": name, "ngram": None, "k": None, "precision": p,
                     "recall": r, "f1": f, "tp": None, "fp": None, "fn": None,
                     "source": "reference (not computed)"})
    rows.sort(key=lambda d: (-d["f1"], d["name"]))
    return rows


def aggregate_csv(report: EvalReport) -> str:
    lines = ["model,ngram,k,precision,recall,f1,tp,fp,fn,source"]
    for d in _sorted_summary(report):
        lines.append(",".join([d["name"], _num(d["ngram"]), _num(d["k"]),
                               _num(float(d["precision"])), _num(float(d["recall"])),
                               _num(float(d["f1"])), _num(d["tp"]), _num(d["fp"]),
                               _num(d["fn"]), d["source"]]))
    return "\n".join(lines) + "\n"


def fscores_csv(report: EvalReport) -> str:
    lines = ["ngram,method,f1"]
    for s in report.summary():
        lines.append(f"{_num(s['ngram'])},{s['model']},{repr(s['f1'])}")
    return "\n".join(lines) + "\n"


def split_csv(report: EvalReport) -> str:
    lines = ["model,ngram,k,subset,precision,recall,f1,tp,fp,fn"]
    for model, ngram in report.models():
        k = report.best_k(model, ngram)
        for subset, c in report.rest_split(model, ngram).items():
            lines.append(",".join([model, _num(ngram), _num(k), subset, repr(c.precision),
                                   repr(c.recall), repr(c.f1), str(c.tp), str(c.fp), str(c.fn)]))
    return "\n".join(lines) + "\n"


def text_table(report: EvalReport) -> str:
    header = ["Model", "k", "Precision", "Recall", "F1", "TP", "FP", "FN", "Source"]
    body = []
    for d in _sorted_summary(report):
        body.append([d["name"], "" if d["k"] is None else f"{d['k']:.2f}",
                     f"{d['precision']:.4f}", f"{d['recall']:.4f}", f"{d['f1']:.4f}",
                     _num(d["tp"]), _num(d["fp"]), _num(d["fn"]), d["source"]])
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]

    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in body)
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, format: str = "text") -> str:
    """Render a report as ``csv`` (per-fold rows) or ``text`` (ranked table)."""
    if format == "csv":
        return report_csv(report)
    if format in ("text", "text-table"):
        return text_table(report)
    raise ValueError(f"unknown report format {format!r}")


def write_report(report: EvalReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    files = {
        "report.csv": report_csv(report),
        "aggregate.csv": aggregate_csv(report),
        "f_scores.csv": fscores_csv(report),
        "rest_split.csv": split_csv(report),
        "table.txt": text_table(report),
        "diagnostics.json": json.dumps(report.diagnostics, indent=1, sort_keys=True) + "\n",
    }
    paths = []
    for name, text in files.items():
        atomic_write_text(out / name, text)
        paths.append(out / name)
    return paths
