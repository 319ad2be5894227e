"""
Preprocessing of meta-feature matrices and results tables.

Handles validation of descriptors, alignment of meta matrices with results
tables, detection of missing score cells, and per-group best scores.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .data_loader import ResultsTable
from .exceptions import ContractError
from .registry import Registry

logger = logging.getLogger(__name__)


class MetaPreprocessor:
    """Prepare meta matrices and results for the meta-analysis scenarios."""

    def __init__(self, registry: Registry):
        """
        Initialize preprocessor.

        Parameters
        ----------
        registry : Registry
            Method families, measure orientations and the reliable-defaults group
        """
        self.registry = registry

    def clean_meta_matrix(
        self, meta: pd.DataFrame, drop_incomplete: bool = False
    ) -> pd.DataFrame:
        """
        Validate a meta-feature matrix (one row per dataset).

        Parameters
        ----------
        meta : pd.DataFrame
            Meta features indexed by dataset name
        drop_incomplete : bool
            Drop rows with missing descriptors instead of failing

        Returns
        -------
        pd.DataFrame
            Float matrix sorted by dataset name
        """
        if meta.empty:
            raise ContractError("meta-feature matrix is empty")
        if meta.index.has_duplicates:
            duplicated = meta.index[meta.index.duplicated()].unique().tolist()
            raise ContractError(f"duplicate datasets in meta-feature matrix: {duplicated}")
        meta = meta.astype(float).replace([np.inf, -np.inf], np.nan)
        incomplete = meta.index[meta.isna().any(axis=1)].tolist()
        if incomplete:
            if not drop_incomplete:
                raise ContractError(f"meta-feature rows with missing values: {incomplete}")
            logger.warning(f"Dropping {len(incomplete)} incomplete meta-feature rows: {incomplete}")
            meta = meta.drop(index=incomplete)
        meta.index = meta.index.astype(str)
        meta.index.name = "dataset"
        return meta.sort_index()

    def align(
        self, meta: pd.DataFrame, results: ResultsTable
    ) -> Tuple[pd.DataFrame, List[str], List[str]]:
        """
        Restrict the meta matrix to datasets that have results.

        Returns
        -------
        Tuple[pd.DataFrame, List[str], List[str]]
            (aligned meta matrix, datasets without results, datasets without meta features)
        """
        with_results = set(results.datasets)
        no_results = sorted(d for d in meta.index if d not in with_results)
        no_meta = sorted(d for d in with_results if d not in set(meta.index))
        if no_results:
            logger.warning(f"{len(no_results)} datasets have meta features but no results")
        if no_meta:
            logger.info(f"{len(no_meta)} datasets have results but no meta features")
        return meta.loc[[d for d in meta.index if d in with_results]], no_results, no_meta

    def missing_cells(
        self,
        results: ResultsTable,
        datasets: Sequence[str],
        methods: Sequence[str],
        measure: str,
        setting: str = "tuned",
    ) -> List[Tuple[str, str, str]]:
        """(dataset, method, measure) cells absent from `results`."""
        matrix = results.score_matrix(measure, setting).reindex(
            index=list(datasets), columns=list(methods)
        )
        missing = []
        for dataset in matrix.index:
            for method in matrix.columns:
                if np.isnan(matrix.at[dataset, method]):
                    missing.append((dataset, method, measure))
        return missing

    def measure_methods(self, results: ResultsTable, measure: str) -> List[str]:
        """Methods with at least one score for `measure`."""
        scores = results.scores
        return sorted(scores.loc[scores["measure"] == measure, "method"].unique())

    def group_best(
        self,
        results: ResultsTable,
        measure: str,
        methods: Optional[Sequence[str]] = None,
        setting: str = "tuned",
    ) -> pd.DataFrame:
        """
        Best oriented score per dataset within each method group.

        Parameters
        ----------
        results : ResultsTable
            Scores
        measure : str
            Measure name (orientation from the registry)
        methods : list of str, optional
            Methods to consider; all methods scored on `measure` if omitted
        setting : str
            'tuned' or 'default'

        Returns
        -------
        pd.DataFrame
            Index dataset, columns 'reliable-defaults' and 'hyper-tuned';
            values are oriented (larger is better), NaN where a group has
            no score for the dataset
        """
        methods = list(methods) if methods is not None else self.measure_methods(results, measure)
        groups = self.registry.split_groups(methods)
        for name, members in groups.items():
            if not members:
                raise ContractError(f"method group '{name}' has no methods scored on '{measure}'")
        matrix = results.score_matrix(measure, setting).reindex(columns=methods)
        sign = 1.0 if self.registry.higher_is_better(measure) else -1.0
        oriented = sign * matrix
        return pd.DataFrame(
            {name: oriented[members].max(axis=1, skipna=True) for name, members in groups.items()}
        )

