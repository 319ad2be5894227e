"""Tests for meta dataset assembly, leave-one-out selection and the landscape."""

import numpy as np
import pandas as pd
import pytest

from src.exceptions import ContractError, MissingScoresError, SchemaError
from src.meta_analyzer import HYPER_TUNED, RELIABLE_DEFAULTS, MetaAnalyzer
from tests.conftest import make_results

ODD = ["ds01", "ds03", "ds05", "ds07", "ds09", "ds11"]
EVEN = ["ds02", "ds04", "ds06", "ds08", "ds10", "ds12"]


@pytest.fixture
def analyzer(registry):
    return MetaAnalyzer(registry)


def small_meta(values):
    meta = pd.DataFrame({"D.2": values}, index=[f"d{i}" for i in range(len(values))])
    meta.index.name = "dataset"
    return meta


class TestAssemble:
    def test_scores_targets(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "F1.macro", None, "scores")
        assert md.methods == ["EBRJ48", "RFDTBR", "RFPCT"]
        assert md.targets.shape == (12, 3)
        assert md.mode == "regression"
        assert md.targets.loc["ds01", "RFDTBR"] == pytest.approx(0.49)

    def test_best_method_labels(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "F1.macro", None, "best")
        labels = md.targets["best_method"]
        assert set(labels[ODD]) == {"RFDTBR"}
        assert set(labels[EVEN]) == {"RFPCT"}
        assert not md.ties.any()

    def test_best_respects_orientation(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "hamming_loss", None, "best")
        assert set(md.targets["best_method"]) == {"RFPCT"}

    def test_tie_goes_to_first_name(self, analyzer):
        results = make_results(
            [
                ("d0", "MLkNN", "F1.macro", 0.5),
                ("d0", "BR", "F1.macro", 0.5),
                ("d1", "MLkNN", "F1.macro", 0.6),
                ("d1", "BR", "F1.macro", 0.4),
            ]
        )
        md = analyzer.assemble(small_meta([1.0, 2.0]), results, "F1.macro", None, "best")
        assert md.targets["best_method"].tolist() == ["BR", "MLkNN"]
        assert md.ties.tolist() == [True, False]
        assert md.to_frame()["tie"].tolist() == [True, False]

    def test_tune_labels_need_strict_win(self, analyzer):
        results = make_results(
            [
                ("d0", "BR", "hamming_loss", 0.10),
                ("d0", "RFPCT", "hamming_loss", 0.20),
                ("d1", "BR", "hamming_loss", 0.20),
                ("d1", "MLkNN", "hamming_loss", 0.25),
                ("d1", "RFPCT", "hamming_loss", 0.20),
                ("d2", "MLkNN", "hamming_loss", 0.30),
                ("d2", "RFPCT", "hamming_loss", 0.10),
            ]
        )
        md = analyzer.assemble(small_meta([1.0, 2.0, 3.0]), results, "hamming_loss", None, "tune")
        assert md.targets["tune_label"].tolist() == [HYPER_TUNED, RELIABLE_DEFAULTS, RELIABLE_DEFAULTS]
        assert md.ties.tolist() == [False, True, False]

    def test_tune_needs_both_groups(self, analyzer, meta_matrix, results):
        with pytest.raises(ContractError, match=HYPER_TUNED):
            analyzer.assemble(meta_matrix, results, "hamming_loss", None, "tune")

    def test_missing_scores(self, analyzer):
        results = make_results(
            [
                ("d0", "BR", "F1.macro", 0.5),
                ("d0", "MLkNN", "F1.macro", 0.4),
                ("d1", "BR", "F1.macro", 0.3),
            ]
        )
        with pytest.raises(MissingScoresError) as excinfo:
            analyzer.assemble(small_meta([1.0, 2.0]), results, "F1.macro", None, "scores")
        assert excinfo.value.missing == [("d1", "MLkNN", "F1.macro")]

        md = analyzer.assemble(
            small_meta([1.0, 2.0]), results, "F1.macro", None, "scores", allow_missing=True
        )
        assert md.descriptors.index.tolist() == ["d0"]
        assert md.excluded == [("d1", "MLkNN", "F1.macro")]

    def test_unknown_target_kind(self, analyzer, meta_matrix, results):
        with pytest.raises(ContractError):
            analyzer.assemble(meta_matrix, results, "F1.macro", None, "rank")

    def test_incomplete_meta_matrix(self, analyzer, meta_matrix, results):
        broken = meta_matrix.copy()
        broken.loc["ds05", "D.3"] = np.nan
        with pytest.raises(ContractError, match="ds05"):
            analyzer.assemble(broken, results, "F1.macro", None, "scores")


class TestLeaveOneOut:
    def test_three_point_regression(self, analyzer):
        results = make_results(
            [(f"d{i}", "BR", "F1.macro", v) for i, v in enumerate((0.2, 0.4, 0.6))]
        )
        md = analyzer.assemble(small_meta([1.0, 2.0, 3.0]), results, "F1.macro", None, "scores")
        report = analyzer.loo_evaluate(md, f_grid=[0.05, 0.01], max_depth=0)
        assert report.f_grid == [0.01, 0.05]
        assert report.baseline["mean"] == pytest.approx(0.2)
        assert report.per_f.loc[0.01, "mean"] == pytest.approx(0.2)
        assert report.selected_f == 0.01

    def test_best_method_beats_majority(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "F1.macro", None, "best")
        report = analyzer.loo_evaluate(md, f_grid=[0.05])
        assert report.per_f.loc[0.05, "accuracy"] == 1.0
        assert report.per_f.loc[0.05, "accuracy"] > report.baseline["accuracy"]
        held_out = report.predictions[0.05]
        assert held_out.loc["ds01", "prediction"] == "RFDTBR"
        assert {"p_RFDTBR", "p_RFPCT", "leaf_id"} <= set(held_out.columns)

    def test_fit_uses_selected_level(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "F1.macro", None, "best")
        tree, report = analyzer.fit(md, f_grid=[0.01, 0.05])
        assert tree.params.f_level == report.selected_f
        assert tree.root.split.column == "L.RL.3"
        assert tree.predict(meta_matrix.loc["ds12"]) == "RFPCT"

    def test_constant_target_note(self, analyzer):
        results = make_results([(f"d{i}", "BR", "F1.macro", 0.5) for i in range(4)])
        md = analyzer.assemble(small_meta([1.0, 2.0, 3.0, 4.0]), results, "F1.macro", None, "scores")
        report = analyzer.loo_evaluate(md, f_grid=[0.05])
        assert report.notes
        assert report.baseline["mean"] == pytest.approx(report.per_f.loc[0.05, "mean"])

    def test_needs_three_rows(self, analyzer):
        results = make_results([(f"d{i}", "BR", "F1.macro", 0.5) for i in range(2)])
        md = analyzer.assemble(small_meta([1.0, 2.0]), results, "F1.macro", None, "scores")
        with pytest.raises(ContractError):
            analyzer.loo_evaluate(md)

    def test_report_dict(self, analyzer, meta_matrix, results):
        md = analyzer.assemble(meta_matrix, results, "F1.macro", None, "best")
        document = analyzer.loo_evaluate(md, f_grid=[0.05]).to_dict()
        assert document["per_f"][0]["f_level"] == 0.05
        assert document["kind"] == "classification"


class TestLandscape:
    def test_top_one_counts(self, analyzer, meta_matrix, results):
        result = analyzer.landscape(meta_matrix, results, ["hamming_loss", "F1.macro"], k_top=1)
        totals = result.counts.groupby(["measure", "family"])["count"].sum()
        assert totals[("hamming_loss", "AA")] == 12
        assert totals[("hamming_loss", "PT.BR")] == 0
        assert totals[("F1.macro", "AA")] == 6
        assert totals[("F1.macro", "PT.BR")] == 6
        hamming = result.dominant[result.dominant["measure"] == "hamming_loss"]
        assert set(hamming["dominant_family"]) == {"AA"}

    def test_top_k_saturates(self, analyzer, meta_matrix, results):
        result = analyzer.landscape(meta_matrix, results, ["hamming_loss"], k_top=5)
        totals = result.counts.groupby("family")["count"].sum()
        assert totals["AA"] == 12
        assert totals["PT.BR"] == 12
        assert totals["PT.LP"] == 0
        assert totals["OTHER"] == 0

    def test_leaf_annotations_and_sizes(self, analyzer, meta_matrix, results):
        result = analyzer.landscape(meta_matrix, results, ["hamming_loss"], k_top=1)
        leaves = result.tree.leaves()
        assert sum(leaf.n for leaf in leaves) == 12
        for leaf in leaves:
            assert leaf.annotations["hamming_loss"]["AA"] == leaf.n
        assert result.metadata["k_top"] == 1

    def test_datasets_without_results(self, analyzer, meta_matrix, results):
        orphan = meta_matrix.loc[["ds01"]].rename(index={"ds01": "ds13"})
        extra = pd.concat([meta_matrix, orphan])
        result = analyzer.landscape(extra, results, ["hamming_loss"], k_top=1)
        assert result.excluded == ["ds13"]
        assert result.counts.groupby("family")["count"].sum()["AA"] == 12

    def test_unknown_measure(self, analyzer, meta_matrix, results):
        with pytest.raises(SchemaError, match="one_error"):
            analyzer.landscape(meta_matrix, results, ["one_error"])

    def test_bad_k(self, analyzer, meta_matrix, results):
        with pytest.raises(ContractError):
            analyzer.landscape(meta_matrix, results, ["hamming_loss"], k_top=0)
