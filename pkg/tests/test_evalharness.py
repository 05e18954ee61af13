import numpy as np
import pytest

from melseg.baselines import REFERENCE_ROWS
from melseg.corpus import boundary_vector
from melseg.errors import FoldTooSmall, ValidationError
from melseg.evalharness import (
    EvalReport,
    FoldPlan,
    FoldResult,
    PipelineSpec,
    aggregate_csv,
    emit_report,
    run_cv,
    write_report,
)
from melseg.metrics import Counts
from melseg.rbm import TrainConfig
from melseg.sampler import SamplerConfig
from melseg.synth import SynthSpec, generate_synthetic_corpus

CORPUS = generate_synthetic_corpus(SynthSpec(melodies=25), seed=3)
TINY_RBM = PipelineSpec("rbm", n=2, hidden=8, train=TrainConfig(epochs=2, n_chains=10),
                        sampler=SamplerConfig(5, 5))


class TestFoldPlan:
    def test_partition(self):
        plan = FoldPlan.make(CORPUS.ids, 5, seed=1)
        tests = [plan.test_ids(f, CORPUS.ids) for f in range(5)]
        assert sorted(sum(tests, [])) == sorted(CORPUS.ids)
        assert all(len(t) == 5 for t in tests)
        assert set(plan.train_ids(0, CORPUS.ids)) == set(CORPUS.ids) - set(tests[0])

    def test_order_independent(self):
        a = FoldPlan.make(CORPUS.ids, 4, seed=2)
        b = FoldPlan.make(list(reversed(CORPUS.ids)), 4, seed=2)
        assert a.assignment == b.assignment

    def test_seed_changes_assignment(self):
        assert FoldPlan.make(CORPUS.ids, 5, 0).assignment != FoldPlan.make(CORPUS.ids, 5, 1).assignment

    def test_too_small(self):
        with pytest.raises(FoldTooSmall):
            FoldPlan.make(["a", "b"], 3)


class TestRunCv:
    def test_always_closed_form(self):
        rep = run_cv(CORPUS, PipelineSpec("baseline:always"), folds=5)
        truth = [boundary_vector(m) for m in CORPUS]
        b = sum(int(t.sum()) for t in truth) / sum(len(m) - 1 for m in CORPUS)
        (row,) = rep.summary()
        assert row["f1"] == pytest.approx(2 * b / (1 + b), abs=1e-12)
        assert row["recall"] == 1.0

    def test_digram_rows(self):
        rep = run_cv(CORPUS, PipelineSpec("baseline:tp"), folds=5)
        assert rep.ks("tp", 2) == sorted(rep.ks("tp", 2))
        assert len(rep.rows) == 5 * 7
        assert rep.notes

    def test_best_k_pools_counts(self):
        rep = EvalReport(rows=[
            FoldResult("m", 3, 0.7, 0, Counts(5, 5, 0)), FoldResult("m", 3, 0.7, 1, Counts(0, 0, 5)),
            FoldResult("m", 3, 0.9, 0, Counts(4, 1, 1)), FoldResult("m", 3, 0.9, 1, Counts(3, 1, 2)),
        ])
        assert rep.pooled("m", 3, 0.9) == Counts(7, 2, 3)
        assert rep.best_k("m", 3) == 0.9

    def test_threads_do_not_change_reports(self, tmp_path):
        one = run_cv(CORPUS, TINY_RBM, folds=3, master_seed=4, threads=1)
        three = run_cv(CORPUS, TINY_RBM, folds=3, master_seed=4, threads=3)
        write_report(one, tmp_path / "a")
        write_report(three, tmp_path / "b")
        for name in ("report.csv", "aggregate.csv", "f_scores.csv", "rest_split.csv",
                     "table.txt", "diagnostics.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_pipeline(self):
        with pytest.raises(ValidationError):
            PipelineSpec("baseline:grouper")
        with pytest.raises(ValidationError):
            PipelineSpec("lstm")


class TestEmitReport:
    def test_reference_only(self):
        text = emit_report(EvalReport(), "text")
        assert text.count("reference (not computed)") == len(REFERENCE_ROWS)

    def test_equal_f1_sorted_by_name(self):
        rep = EvalReport(rows=[FoldResult("zeta", None, None, 0, Counts(1, 1, 1)),
                               FoldResult("alpha", None, None, 0, Counts(1, 1, 1))])
        lines = [ln.split()[0] for ln in emit_report(rep, "text").splitlines()[2:]]
        assert lines.index("alpha") + 1 == lines.index("zeta")

    def test_counts_consistent_with_rates(self):
        rep = run_cv(CORPUS, PipelineSpec("baseline:gpr2a"), folds=5)
        for line in aggregate_csv(rep).splitlines()[1:]:
            f = line.split(",")
            if f[-1] != "computed":
                continue
            tp, fp, fn = int(f[6]), int(f[7]), int(f[8])
            assert float(f[3]) == pytest.approx(tp / (tp + fp))
            assert float(f[4]) == pytest.approx(tp / (tp + fn))

    def test_csv_has_one_row_per_fold(self):
        rep = run_cv(CORPUS, PipelineSpec("baseline:never"), folds=5)
        lines = emit_report(rep, "csv").splitlines()
        assert lines[0] == "model,ngram,k,fold,precision,recall,f1"
        assert [ln.split(",")[3] for ln in lines[1:]] == ["0", "1", "2", "3", "4"]

    def test_rest_split_covers_all_notes(self):
        rep = run_cv(CORPUS, PipelineSpec("baseline:always"), folds=5)
        split = rep.rest_split("always", None)
        total = split["rest"] + split["no-rest"]
        assert total == rep.best("always", None)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(EvalReport(), "xml")
