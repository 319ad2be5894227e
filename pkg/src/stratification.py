"""
Iterative stratification for multi-label datasets.

k-fold splitting and exact-size subsampling that keep per-label frequencies
close to the full dataset. Both run scikit-multilearn's first-order
IterativeStratification; its random tie-breaks draw from a numpy
RandomState (MT19937) seeded with the caller's seed, so assignments are
reproducible.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from skmultilearn.model_selection import IterativeStratification

from .data_loader import MlcDataset
from .exceptions import ContractError

logger = logging.getLogger(__name__)

GENERATOR = "numpy.RandomState(MT19937)"
MODES = ("labels", "labelsets")

@dataclass(frozen=True)
class FoldAssignment:
    """Fold index per example, with the parameters that produced it."""

    folds: np.ndarray
    k: int
    seed: int
    generator: str = GENERATOR
    mode: str = "labels"

    def __post_init__(self):
        folds = np.asarray(self.folds, dtype=np.int64)
        if folds.ndim != 1 or folds.size == 0:
            raise ContractError("fold assignment must be a non-empty vector")
        if folds.min() < 0 or folds.max() >= self.k:
            raise ContractError(f"fold indices must lie in 0..{self.k - 1}")
        folds.setflags(write=False)
        object.__setattr__(self, "folds", folds)

    def __len__(self) -> int:
        return len(self.folds)

    def fold_sizes(self) -> List[int]:
        return np.bincount(self.folds, minlength=self.k).tolist()

    def indices(self, fold: int) -> np.ndarray:
        """Example indices assigned to `fold`."""
        return np.flatnonzero(self.folds == fold)

    def train_test(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) with `fold` held out."""
        return np.flatnonzero(self.folds != fold), self.indices(fold)

    def to_frame(self) -> pd.DataFrame:
        """Export table with columns example_index, fold."""
        return pd.DataFrame({"example_index": np.arange(len(self.folds)), "fold": self.folds})


def _stratification_targets(ds: MlcDataset, mode: str) -> np.ndarray:
    """Binary matrix whose columns are stratified: labels, or one column per labelset."""
    if mode == "labels":
        return ds.labels.astype(np.int64)
    if mode == "labelsets":
        _, inverse = np.unique(ds.labels, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        targets = np.zeros((ds.n_instances, inverse.max() + 1), dtype=np.int64)
        targets[np.arange(ds.n_instances), inverse] = 1
        return targets
    raise ContractError(f"unknown stratification mode '{mode}', expected one of {MODES}")


def stratified_parts(targets: np.ndarray, ratios: Sequence[float], seed: int) -> np.ndarray:
    """
    Assign every example to a part with IterativeStratification.

    Parameters
    ----------
    targets : np.ndarray
        N x L binary matrix of the columns to stratify
    ratios : sequence of float
        Desired share of examples per part, summing to 1
    seed : int
        Seed for the stratifier's random tie-breaks

    Returns
    -------
    np.ndarray
        Part index per example
    """
    targets = np.asarray(targets, dtype=np.int64)
    stratifier = IterativeStratification(
        n_splits=len(ratios), order=1, sample_distribution_per_fold=[float(r) for r in ratios]
    )
    # KFold rejects random_state without shuffle; the stratifier reads it when splitting
    stratifier.random_state = seed
    parts = np.full(targets.shape[0], -1, dtype=np.int64)
    placeholder = np.zeros((targets.shape[0], 1))
    for part, (_, test) in enumerate(stratifier.split(placeholder, targets)):
        parts[np.asarray(test, dtype=np.int64)] = part
    if (parts < 0).any():
        raise ContractError("stratifier left examples unassigned")
    return parts


def iterative_stratified_folds(
    ds: MlcDataset, k: int, seed: int, mode: str = "labels"
) -> FoldAssignment:
    """
    Split a dataset into k iteratively stratified folds.

    Parameters
    ----------
    ds : MlcDataset
        Dataset to split
    k : int
        Number of folds (2 <= k <= N)
    seed : int
        Seed for random tie-breaks
    mode : str
        'labels' (per-label quotas) or 'labelsets' (one quota per distinct labelset)

    Returns
    -------
    FoldAssignment
        Fold index per example
    """
    if k < 2:
        raise ContractError(f"k must be at least 2, got {k}")
    if k > ds.n_instances:
        raise ContractError(f"k={k} exceeds the number of instances ({ds.n_instances})")
    targets = _stratification_targets(ds, mode)
    folds = stratified_parts(targets, [1.0 / k] * k, seed)
    assignment = FoldAssignment(folds=folds, k=k, seed=seed, mode=mode)
    logger.info(f"Stratified {ds.n_instances} instances into {k} folds: {assignment.fold_sizes()}")
    return assignment


def _majority_labelset_members(labels: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """Members of `pool` carrying the labelset most frequent within it (ties: first in sort order)."""
    _, inverse, counts = np.unique(
        labels[pool], axis=0, return_inverse=True, return_counts=True
    )
    inverse = np.asarray(inverse).ravel()
    return pool[inverse == int(np.argmax(counts))]


def stratified_subsample(
    ds: MlcDataset, m: int, seed: int, mode: str = "labels"
) -> List[int]:
    """
    Exact-size stratified subsample.

    The stratifier runs with part shares (m/N, 1 - m/N); the first part
    is then trimmed or padded one example at a time with examples of the
    majority labelset (of the part when trimming, of the rest when padding).

    Parameters
    ----------
    ds : MlcDataset
        Dataset to sample from
    m : int
        Subsample size (1 <= m <= N)
    seed : int
        Seed for random tie-breaks and trim/pad picks

    Returns
    -------
    list of int
        Sorted indices of the m selected examples
    """
    n = ds.n_instances
    if not 1 <= m <= n:
        raise ContractError(f"subsample size must lie in 1..{n}, got {m}")
    if m == n:
        return list(range(n))

    parts = stratified_parts(_stratification_targets(ds, mode), [m / n, 1 - m / n], seed)
    selected = np.flatnonzero(parts == 0)
    rest = np.flatnonzero(parts != 0)
    if len(selected) != m:
        logger.debug(f"Adjusting subsample from {len(selected)} to {m} examples")
    rng = np.random.RandomState(seed)
    while len(selected) > m:
        members = _majority_labelset_members(ds.labels, selected)
        drop = members[rng.randint(len(members))]
        selected = selected[selected != drop]
        rest = np.sort(np.append(rest, drop))
    while len(selected) < m:
        members = _majority_labelset_members(ds.labels, rest)
        add = members[rng.randint(len(members))]
        rest = rest[rest != add]
        selected = np.sort(np.append(selected, add))
    return selected.tolist()
