"""
Analyses of experiment success and hyperparameter tuning.

Covers the ratio of successfully finished experiments (RSED), relative
improvement of tuned over default hyperparameters, tuned-vs-defaults
difference summaries, and the tune-or-not classification tree.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.metrics import average_precision_score

from .data_loader import ResultsTable
from .evaluation import auroc
from .exceptions import ContractError, UndefinedMeasureError
from .meta_analyzer import (
    DEFAULT_F_GRID,
    HYPER_TUNED,
    RELIABLE_DEFAULTS,
    LooReport,
    MetaAnalyzer,
    MetaDataset,
)
from .pct import Tree
from .preprocessor import MetaPreprocessor
from .registry import Registry

logger = logging.getLogger(__name__)

NO_LOSS = "default loss is 0, nothing to improve"
CLAMPED = "tuned loss worse than default, clamped to 0"


@dataclass
class RsedReport:
    """RSED cells with their per-method and per-dataset marginal means."""

    cells: pd.DataFrame
    method_rsed: pd.Series
    dataset_rsed: pd.Series
    excluded: List[Tuple[str, str]] = field(default_factory=list)

    def method_distributions(self) -> Dict[str, List[float]]:
        """Per-method RSED values over datasets (box-plot input)."""
        return {
            method: group["rsed"].tolist()
            for method, group in self.cells.groupby("method", sort=True)
        }

    def method_quartiles(self) -> pd.DataFrame:
        return _quartiles(self.method_distributions())

    def dataset_shares(self, high: float = 2.0 / 3.0, low: float = 0.3) -> Dict[str, float]:
        """Share of datasets with dsRSED above `high` and below `low`."""
        values = self.dataset_rsed.to_numpy()
        return {
            "above_high": float(np.mean(values > high)),
            "below_low": float(np.mean(values < low)),
            "high": high,
            "low": low,
        }

    def to_dict(self) -> Dict:
        return {
            "method_rsed": {k: float(v) for k, v in self.method_rsed.items()},
            "dataset_rsed": {k: float(v) for k, v in self.dataset_rsed.items()},
            "method_distributions": self.method_distributions(),
            "method_quartiles": self.method_quartiles().reset_index().to_dict(orient="records"),
            "dataset_shares": self.dataset_shares(),
            "excluded": [{"dataset": d, "method": m} for d, m in self.excluded],
        }


@dataclass
class TuneOrNotResult:
    """Tune-label meta dataset, the final tree and its leave-one-out quality."""

    meta_dataset: MetaDataset
    tree: Tree
    report: LooReport
    quality: Dict[str, Optional[float]]
    differences: Dict[str, Dict] = field(default_factory=dict)


def _quartiles(distributions: Dict[str, List[float]]) -> pd.DataFrame:
    rows = []
    for key, values in distributions.items():
        if not values:
            continue
        q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
        rows.append({"key": key, "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]})
    return pd.DataFrame(rows, columns=["key", "min", "q1", "median", "q3", "max"]).set_index("key")


def _skewness(values: np.ndarray) -> float:
    if len(values) < 2 or np.all(values == values[0]):
        return 0.0
    return float(stats.skew(values, bias=True))


def relative_improvement_with_flag(
    default_loss: float, tuned_loss: float
) -> Tuple[float, Optional[str]]:
    """
    Relative improvement of a tuned loss over the default loss.

    Parameters
    ----------
    default_loss : float
        Loss with default hyperparameters, in [0, 1]
    tuned_loss : float
        Loss after tuning, in [0, 1]

    Returns
    -------
    Tuple[float, Optional[str]]
        (improvement in [0, 1], flag or None); a default loss of 0 gives 0
        and a tuned loss above the default is clamped to 0
    """
    for name, value in (("default_loss", default_loss), ("tuned_loss", tuned_loss)):
        if not 0.0 <= value <= 1.0:
            raise ContractError(f"{name} must lie in [0, 1], got {value}")
    if default_loss == 0:
        return 0.0, NO_LOSS
    if tuned_loss > default_loss:
        return 0.0, CLAMPED
    return (default_loss - tuned_loss) / default_loss, None


def relative_improvement(default_loss: float, tuned_loss: float) -> float:
    """(default_loss - tuned_loss) / default_loss, see relative_improvement_with_flag."""
    return relative_improvement_with_flag(default_loss, tuned_loss)[0]


class TuningAnalyzer:
    """Success, tuning and tune-or-not analyses over a results table."""

    def __init__(self, registry: Registry, show_progress: bool = False):
        """
        Initialize TuningAnalyzer.

        Parameters
        ----------
        registry : Registry
            Measure orientations and the reliable-defaults group
        show_progress : bool
            Show progress bars during leave-one-out evaluation
        """
        self.registry = registry
        self.preprocessor = MetaPreprocessor(registry)
        self.meta_analyzer = MetaAnalyzer(registry, show_progress=show_progress)

    def rsed(self, results: ResultsTable) -> RsedReport:
        """
        Ratio of successfully finished experiments per (dataset, method).

        Cells with zero attempts are excluded and reported.
        """
        log = results.success
        if log.empty:
            raise ContractError("results have no success-log rows")
        excluded_mask = log["attempted"] == 0
        excluded = list(
            log.loc[excluded_mask, ["dataset", "method"]].itertuples(index=False, name=None)
        )
        if excluded:
            logger.warning(f"{len(excluded)} success-log cells have no attempts and are excluded")
        cells = log.loc[~excluded_mask, ["dataset", "method"]].copy()
        cells["rsed"] = log.loc[~excluded_mask, "finished"] / log.loc[~excluded_mask, "attempted"]
        if cells.empty:
            raise ContractError("no success-log cell has attempts")
        cells = cells.sort_values(["dataset", "method"]).reset_index(drop=True)
        method_rsed = cells.groupby("method", sort=True)["rsed"].mean()
        dataset_rsed = cells.groupby("dataset", sort=True)["rsed"].mean()
        logger.info(
            f"RSED over {len(cells)} cells: mean methodRSED {method_rsed.mean():.3f}, "
            f"mean dsRSED {dataset_rsed.mean():.3f}"
        )
        return RsedReport(
            cells=cells, method_rsed=method_rsed, dataset_rsed=dataset_rsed, excluded=excluded
        )

    def _losses(self, results: ResultsTable, measure: str, setting: str) -> pd.DataFrame:
        """Score matrix as losses in [0, 1]: lower-better scores as is, higher-better rates as 1 - score."""
        matrix = results.score_matrix(measure, setting)
        if self.registry.higher_is_better(measure):
            if not self.registry.is_rate(measure):
                raise ContractError(
                    f"relative improvement needs a loss or a rate measure, '{measure}' is neither"
                )
            return 1.0 - matrix
        return matrix

    def improvements(
        self, results: ResultsTable, measure: str = "hamming_loss"
    ) -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
        """
        Relative improvement per (dataset, method) with both default and tuned scores.

        Returns
        -------
        Tuple[pd.DataFrame, List[Tuple[str, str]]]
            (table with dataset, method, improvement, flag; missing cells)
        """
        tuned = self._losses(results, measure, "tuned")
        default = self._losses(results, measure, "default")
        datasets = sorted(set(tuned.index) | set(default.index))
        methods = sorted(set(tuned.columns) | set(default.columns))
        tuned = tuned.reindex(index=datasets, columns=methods)
        default = default.reindex(index=datasets, columns=methods)
        rows = []
        missing = []
        for method in methods:
            for dataset in datasets:
                d, t = default.at[dataset, method], tuned.at[dataset, method]
                if np.isnan(d) or np.isnan(t):
                    missing.append((dataset, method))
                    continue
                value, flag = relative_improvement_with_flag(float(d), float(t))
                rows.append(
                    {"dataset": dataset, "method": method, "improvement": value, "flag": flag or ""}
                )
        if missing:
            logger.warning(f"{len(missing)} cells lack a default or tuned {measure} score")
        table = pd.DataFrame(rows, columns=["dataset", "method", "improvement", "flag"])
        return table, missing

    def improvement_histograms(
        self, results: ResultsTable, measure: str = "hamming_loss", bins: int = 20
    ) -> Dict:
        """
        Per-method histograms of relative improvement on [0, 1].

        Bins are half-open except the last, which includes 1. Methods with
        no complete cell are omitted and listed under 'omitted'.
        """
        if bins < 1:
            raise ContractError(f"bins must be at least 1, got {bins}")
        table, missing = self.improvements(results, measure)
        edges = np.linspace(0.0, 1.0, bins + 1)
        methods = {}
        for method, group in table.groupby("method", sort=True):
            values = group["improvement"].to_numpy(dtype=float)
            counts, _ = np.histogram(values, bins=edges)
            methods[method] = {
                "counts": counts.tolist(),
                "n": int(len(values)),
                "skewness": _skewness(values),
                "flags": {f: int((group["flag"] == f).sum()) for f in (NO_LOSS, CLAMPED)},
            }
        all_methods = sorted({m for _, m in missing} | set(methods))
        omitted = [m for m in all_methods if m not in methods]
        return {
            "measure": measure,
            "bin_edges": edges.tolist(),
            "methods": methods,
            "omitted": omitted,
            "missing": [{"dataset": d, "method": m} for d, m in missing],
        }

    def difference_boxplot_data(
        self, results: ResultsTable, measures: Sequence[str]
    ) -> Dict[str, Dict]:
        """
        Best hyper-tuned minus best reliable-defaults score per dataset and measure.

        Differences are oriented so that positive means tuning was better.
        Datasets missing either group are excluded and reported.
        """
        report = {}
        for measure in measures:
            best = self.preprocessor.group_best(results, measure)
            incomplete = best.isna().any(axis=1)
            excluded = best.index[incomplete].tolist()
            if excluded:
                logger.warning(f"{measure}: {len(excluded)} datasets lack one method group")
            differences = (best[HYPER_TUNED] - best[RELIABLE_DEFAULTS])[~incomplete]
            quartiles = _quartiles({measure: differences.tolist()})
            report[measure] = {
                "differences": {k: float(v) for k, v in differences.items()},
                "quartiles": quartiles.loc[measure].to_dict() if len(quartiles) else {},
                "excluded": excluded,
            }
        return report

    def tune_or_not(
        self,
        meta_matrix: pd.DataFrame,
        results: ResultsTable,
        measure: str = "hamming_loss",
        f_grid: Sequence[float] = DEFAULT_F_GRID,
        min_leaf: int = 2,
        max_depth: Optional[int] = None,
        allow_missing: bool = False,
        difference_measures: Sequence[str] = (),
    ) -> TuneOrNotResult:
        """
        Learn a classification tree deciding between tuning and reliable defaults.

        Parameters
        ----------
        meta_matrix : pd.DataFrame
            Meta features indexed by dataset
        results : ResultsTable
            Scores per (dataset, method, measure)
        measure : str
            Measure defining the tune labels
        f_grid, min_leaf, max_depth
            Leave-one-out model selection parameters
        allow_missing : bool
            Drop datasets lacking a group instead of failing
        difference_measures : list of str
            Measures for the accompanying difference summaries

        Returns
        -------
        TuneOrNotResult
            Meta dataset, tree at the selected F-test level, leave-one-out
            accuracy, AUROC and AUPRC (scores are leaf shares of 'hyper-tuned')
        """
        md = self.meta_analyzer.assemble(
            meta_matrix, results, measure, None, "tune", allow_missing=allow_missing
        )
        tree, report = self.meta_analyzer.fit(md, f_grid, min_leaf, max_depth)
        held_out = report.predictions[report.selected_f]
        truth = (md.targets["tune_label"] == HYPER_TUNED).astype(int).to_numpy()
        column = f"p_{HYPER_TUNED}"
        scores = held_out[column].to_numpy(dtype=float) if column in held_out else np.zeros(len(truth))
        quality: Dict[str, Optional[float]] = {
            "accuracy": float(report.per_f.loc[report.selected_f, "accuracy"]),
            "baseline_accuracy": report.baseline["accuracy"],
        }
        try:
            quality["auroc"] = auroc(truth, scores)
        except UndefinedMeasureError:
            quality["auroc"] = None
            report.notes.append("AUROC undefined: tune labels have a single class")
        if truth.any():
            quality["auprc"] = float(average_precision_score(truth, scores))
        else:
            quality["auprc"] = None
            report.notes.append("AUPRC undefined: no dataset is labelled hyper-tuned")
        logger.info(f"Tune-or-not leave-one-out quality: {quality}")
        differences = (
            self.difference_boxplot_data(results, difference_measures) if difference_measures else {}
        )
        return TuneOrNotResult(
            meta_dataset=md, tree=tree, report=report, quality=quality, differences=differences
        )
