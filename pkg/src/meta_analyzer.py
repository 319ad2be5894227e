"""
Meta-learning scenarios over meta-feature matrices and results tables.

- performance models: multi-target regression trees predicting method scores
- best-method models: classification trees predicting the best method
- landscape: clustering tree over datasets annotated with top-performing families

Model quality is estimated with leave-one-dataset-out evaluation over a grid
of F-test levels, against a baseline computed on the same folds.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .data_loader import ResultsTable
from .exceptions import ContractError, MissingScoresError
from .pct import (
    CLASSIFICATION,
    CLUSTERING,
    REGRESSION,
    DataTable,
    LearnParams,
    Tree,
    learn,
)
from .preprocessor import MetaPreprocessor
from .registry import FAMILIES, Registry

logger = logging.getLogger(__name__)

TARGET_KINDS = ("scores", "best", "tune")
DEFAULT_F_GRID = (0.001, 0.01, 0.05, 0.1, 0.125)
HYPER_TUNED = "hyper-tuned"
RELIABLE_DEFAULTS = "reliable-defaults"
TOP_K_RULE = "family counted when any of its methods is in one shared top-k ranking per measure"


@dataclass
class MetaDataset:
    """Meta examples: descriptors and targets keyed by dataset name."""

    descriptors: pd.DataFrame
    targets: pd.DataFrame
    target_kind: str
    measure: str
    methods: List[str]
    ties: pd.Series = field(default_factory=lambda: pd.Series(dtype=bool))
    excluded: List[Tuple[str, str, str]] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.descriptors)

    @property
    def mode(self) -> str:
        return REGRESSION if self.target_kind == "scores" else CLASSIFICATION

    def to_table(self, rows: Optional[Sequence[str]] = None) -> DataTable:
        """DataTable for tree learning, optionally restricted to `rows`."""
        descriptors = self.descriptors if rows is None else self.descriptors.loc[list(rows)]
        targets = self.targets if rows is None else self.targets.loc[list(rows)]
        return DataTable(descriptive=descriptors, targets=targets)

    def to_frame(self) -> pd.DataFrame:
        """Descriptors, targets and (for label targets) the tie flag in one table."""
        frame = pd.concat([self.descriptors, self.targets], axis=1)
        if self.target_kind != "scores":
            frame["tie"] = self.ties.reindex(frame.index).fillna(False).astype(bool)
        return frame


@dataclass
class LooReport:
    """Leave-one-dataset-out results per F-test level."""

    kind: str
    f_grid: List[float]
    per_f: pd.DataFrame
    baseline: Dict[str, float]
    selected_f: float
    predictions: Dict[float, pd.DataFrame] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "f_grid": list(self.f_grid),
            "per_f": [
                {"f_level": float(f), **{k: float(v) for k, v in row.items()}}
                for f, row in self.per_f.iterrows()
            ],
            "baseline": {k: float(v) for k, v in self.baseline.items()},
            "selected_f": self.selected_f,
            "notes": list(self.notes),
        }


@dataclass
class LandscapeResult:
    """Clustering tree whose leaves carry per-measure family counts."""

    tree: Tree
    counts: pd.DataFrame
    dominant: pd.DataFrame
    excluded: List[str] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)


class MetaAnalyzer:
    """Assemble meta datasets and run the meta-learning scenarios."""

    def __init__(self, registry: Registry, show_progress: bool = False):
        """
        Initialize MetaAnalyzer.

        Parameters
        ----------
        registry : Registry
            Method families, measure orientations and method groups
        show_progress : bool
            Show tqdm progress bars for leave-one-out loops
        """
        self.registry = registry
        self.preprocessor = MetaPreprocessor(registry)
        self.show_progress = show_progress

    def assemble(
        self,
        meta_matrix: pd.DataFrame,
        results: ResultsTable,
        measure: str,
        methods: Optional[Sequence[str]],
        target_kind: str,
        allow_missing: bool = False,
    ) -> MetaDataset:
        """
        Build a meta dataset for one scenario.

        Parameters
        ----------
        meta_matrix : pd.DataFrame
            Meta features indexed by dataset
        results : ResultsTable
            Scores per (dataset, method, measure)
        measure : str
            Measure the targets are derived from
        methods : list of str or None
            Methods to use; all methods scored on `measure` when None
        target_kind : str
            'scores' (one regression target per method), 'best' (argbest
            method label) or 'tune' (hyper-tuned vs reliable-defaults label)
        allow_missing : bool
            Drop rows with missing score cells instead of raising

        Returns
        -------
        MetaDataset
            Meta examples sorted by dataset name
        """
        if target_kind not in TARGET_KINDS:
            raise ContractError(f"unknown target kind '{target_kind}', expected one of {TARGET_KINDS}")
        sign = 1.0 if self.registry.higher_is_better(measure) else -1.0
        meta = self.preprocessor.clean_meta_matrix(meta_matrix)
        methods = sorted(methods) if methods else self.preprocessor.measure_methods(results, measure)
        if not methods:
            raise ContractError(f"no methods have scores for measure '{measure}'")
        datasets = meta.index.tolist()
        matrix = results.score_matrix(measure).reindex(index=datasets, columns=methods)

        if target_kind == "tune":
            groups = self.registry.split_groups(methods)
            for name, members in groups.items():
                if not members:
                    raise ContractError(f"method group '{name}' has no methods in the results")
            missing = []
            for dataset in datasets:
                for members in groups.values():
                    if matrix.loc[dataset, members].isna().all():
                        missing += [(dataset, m, measure) for m in members]
        else:
            missing = self.preprocessor.missing_cells(results, datasets, methods, measure)

        if missing:
            if not allow_missing:
                raise MissingScoresError(missing)
            dropped = sorted({cell[0] for cell in missing})
            logger.warning(f"Dropping {len(dropped)} datasets with missing scores: {dropped}")
            meta = meta.drop(index=dropped)
            matrix = matrix.drop(index=dropped)

        oriented = sign * matrix
        ties = pd.Series(False, index=meta.index, name="tie")
        if target_kind == "scores":
            targets = matrix.copy()
            targets.columns.name = None
        elif target_kind == "best":
            labels = []
            for dataset, row in oriented.iterrows():
                top = row.max()
                winners = sorted(row.index[row == top])
                labels.append(winners[0])
                ties[dataset] = len(winners) > 1
            targets = pd.DataFrame({"best_method": labels}, index=meta.index)
        else:
            groups = self.registry.split_groups(methods)
            tuned_best = oriented[groups[HYPER_TUNED]].max(axis=1)
            default_best = oriented[groups[RELIABLE_DEFAULTS]].max(axis=1)
            labels = np.where(tuned_best > default_best, HYPER_TUNED, RELIABLE_DEFAULTS)
            ties = (tuned_best == default_best).rename("tie")
            targets = pd.DataFrame({"tune_label": labels}, index=meta.index)
        targets.index.name = "dataset"
        if ties.any():
            logger.info(f"{int(ties.sum())} meta examples resolved by a tie rule")

        logger.info(
            f"Assembled {target_kind} meta dataset: {len(meta)} datasets, "
            f"{meta.shape[1]} meta features, measure {measure}"
        )
        return MetaDataset(
            descriptors=meta,
            targets=targets,
            target_kind=target_kind,
            measure=measure,
            methods=methods,
            ties=ties,
            excluded=missing if allow_missing else [],
        )

    def loo_evaluate(
        self,
        md: MetaDataset,
        f_grid: Sequence[float] = DEFAULT_F_GRID,
        min_leaf: int = 2,
        max_depth: Optional[int] = None,
    ) -> LooReport:
        """
        Leave-one-dataset-out evaluation of trees for each F-test level.

        Regression reports per-target MAE and their mean; classification
        reports accuracy. The baseline predicts training means (regression)
        or the training majority class (classification). The selected level
        has the smallest mean error; ties go to the smallest level.

        Parameters
        ----------
        md : MetaDataset
            Meta examples (at least 3)
        f_grid : sequence of float
            F-test levels to compare
        min_leaf : int
            Minimum rows per leaf
        max_depth : int, optional
            Depth cap for the trees

        Returns
        -------
        LooReport
            Per-level quality, baseline and selected level
        """
        if md.n_rows < 3:
            raise ContractError(f"leave-one-out needs at least 3 meta examples, got {md.n_rows}")
        if not f_grid:
            raise ContractError("the F-test grid is empty")
        f_grid = sorted(float(f) for f in f_grid)
        rows = md.descriptors.index.tolist()
        classification = md.mode == CLASSIFICATION
        truth = md.targets
        notes = []
        if (truth.nunique() <= 1).all():
            notes.append("constant target: baseline equals model")

        baseline_predictions = []
        for held_out in rows:
            train = truth.drop(index=held_out)
            if classification:
                counts = train.iloc[:, 0].astype(str).value_counts()
                baseline_predictions.append(sorted(counts.index[counts == counts.max()])[0])
            else:
                baseline_predictions.append(train.mean(axis=0).to_numpy())
        if classification:
            baseline_accuracy = float(
                np.mean(np.array(baseline_predictions) == truth.iloc[:, 0].astype(str).to_numpy())
            )
            baseline = {"accuracy": baseline_accuracy}
        else:
            errors = np.abs(truth.to_numpy(dtype=float) - np.vstack(baseline_predictions))
            baseline = dict(zip(truth.columns, errors.mean(axis=0)))
            baseline["mean"] = float(errors.mean())

        per_f = []
        predictions = {}
        folds = [(f, held_out) for f in f_grid for held_out in rows]
        outcomes: Dict[float, List] = {f: [] for f in f_grid}
        for f, held_out in tqdm(folds, desc="leave-one-out", disable=not self.show_progress):
            train_rows = [r for r in rows if r != held_out]
            tree = learn(
                md.to_table(train_rows),
                md.mode,
                LearnParams(f_level=f, min_leaf=min_leaf, max_depth=max_depth),
            )
            row = md.descriptors.loc[held_out]
            leaf = tree.route(row)
            if classification:
                outcome = {"prediction": leaf.prototype}
                for label, share in leaf.stats["proportions"].items():
                    outcome[f"p_{label}"] = share
            else:
                outcome = dict(zip(md.targets.columns, np.asarray(leaf.prototype, dtype=float)))
            outcome["leaf_id"] = leaf.leaf_id
            outcomes[f].append(outcome)

        for f in f_grid:
            frame = pd.DataFrame(outcomes[f], index=pd.Index(rows, name="dataset"))
            if classification:
                frame = frame.fillna(0.0)
                accuracy = float(
                    np.mean(frame["prediction"].to_numpy() == truth.iloc[:, 0].astype(str).to_numpy())
                )
                per_f.append({"accuracy": accuracy, "error": 1.0 - accuracy})
            else:
                errors = np.abs(
                    truth.to_numpy(dtype=float) - frame[list(truth.columns)].to_numpy(dtype=float)
                )
                entry = dict(zip(truth.columns, errors.mean(axis=0)))
                entry["mean"] = float(errors.mean())
                per_f.append(entry)
            predictions[f] = frame

        table = pd.DataFrame(per_f, index=pd.Index(f_grid, name="f_level"))
        error_column = "error" if classification else "mean"
        errors = table[error_column].to_numpy()
        selected = float(f_grid[int(np.flatnonzero(errors == errors.min())[0])])
        logger.info(f"Leave-one-out selected f_level={selected} over {len(rows)} meta examples")
        return LooReport(
            kind=md.mode,
            f_grid=f_grid,
            per_f=table,
            baseline=baseline,
            selected_f=selected,
            predictions=predictions,
            notes=notes,
        )

    def fit(
        self,
        md: MetaDataset,
        f_grid: Sequence[float] = DEFAULT_F_GRID,
        min_leaf: int = 2,
        max_depth: Optional[int] = None,
    ) -> Tuple[Tree, LooReport]:
        """Leave-one-out model selection, then a tree on all rows at the selected level."""
        report = self.loo_evaluate(md, f_grid, min_leaf, max_depth)
        params = LearnParams(f_level=report.selected_f, min_leaf=min_leaf, max_depth=max_depth)
        return learn(md.to_table(), md.mode, params), report

    def top_families(
        self, scores: pd.Series, measure: str, k_top: int
    ) -> Dict[str, bool]:
        """Whether each family has a method among the top-k methods of one dataset."""
        available = scores.dropna().to_dict()
        top = self.registry.rank_methods(measure, available)[:k_top]
        present = {self.registry.family(m) for m in top}
        return {family: family in present for family in FAMILIES}

    def landscape(
        self,
        meta_matrix: pd.DataFrame,
        results: ResultsTable,
        measures: Sequence[str],
        k_top: int = 3,
        f_level: float = 0.05,
        min_leaf: int = 2,
        max_depth: Optional[int] = None,
    ) -> LandscapeResult:
        """
        Clustering tree over datasets with family counts per leaf.

        For each leaf and measure, a family's count is the number of member
        datasets where at least one of its methods ranks among the top
        `k_top` methods (by the measure's orientation, ties by name).

        Parameters
        ----------
        meta_matrix : pd.DataFrame
            Meta features indexed by dataset
        results : ResultsTable
            Scores per (dataset, method, measure)
        measures : list of str
            Measures to annotate
        k_top : int
            Size of the top ranking
        f_level, min_leaf, max_depth
            Tree learning parameters

        Returns
        -------
        LandscapeResult
            Annotated tree, count table and dominant family per leaf and measure
        """
        if k_top < 1:
            raise ContractError(f"k_top must be at least 1, got {k_top}")
        for measure in measures:
            self.registry.orientation(measure)
        meta = self.preprocessor.clean_meta_matrix(meta_matrix)
        _, excluded, _ = self.preprocessor.align(meta, results)
        tree = learn(
            DataTable(descriptive=meta),
            CLUSTERING,
            LearnParams(f_level=f_level, min_leaf=min_leaf, max_depth=max_depth),
        )

        matrices = {m: results.score_matrix(m) for m in measures}
        records = []
        dominant = []
        for leaf in tree.leaves():
            members = [d for d in leaf.members if d not in set(excluded)]
            for measure in measures:
                counts = {family: 0 for family in FAMILIES}
                matrix = matrices[measure]
                for dataset in members:
                    if dataset not in matrix.index:
                        continue
                    present = self.top_families(matrix.loc[dataset], measure, k_top)
                    for family, hit in present.items():
                        counts[family] += int(hit)
                leaf.annotations[measure] = dict(counts)
                for family, count in counts.items():
                    records.append(
                        {
                            "leaf_id": leaf.leaf_id,
                            "measure": measure,
                            "family": family,
                            "count": count,
                            "leaf_size": leaf.n,
                        }
                    )
                top = max(counts.values())
                dominant.append(
                    {
                        "leaf_id": leaf.leaf_id,
                        "measure": measure,
                        "dominant_family": next(f for f in FAMILIES if counts[f] == top)
                        if top > 0
                        else "",
                        "count": top,
                    }
                )
        if excluded:
            logger.warning(f"Datasets without results excluded from annotation: {excluded}")
        return LandscapeResult(
            tree=tree,
            counts=pd.DataFrame(records, columns=["leaf_id", "measure", "family", "count", "leaf_size"]),
            dominant=pd.DataFrame(dominant, columns=["leaf_id", "measure", "dominant_family", "count"]),
            excluded=excluded,
            metadata={"k_top": k_top, "top_k_rule": TOP_K_RULE, "measures": list(measures)},
        )
