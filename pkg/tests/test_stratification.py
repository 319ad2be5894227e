"""Tests for iterative stratification."""

import numpy as np
import pytest
from skmultilearn.model_selection import IterativeStratification

from src.exceptions import ContractError
from src.stratification import (
    GENERATOR,
    FoldAssignment,
    iterative_stratified_folds,
    stratified_subsample,
)
from tests.conftest import build_dataset, random_dataset


def rare_label_dataset(n=10, positives=2):
    labels = np.zeros((n, 2), dtype=int)
    labels[:positives, 0] = 1
    return build_dataset(labels)


def label_deviation(labels, folds, k):
    """Mean absolute gap between per-fold label counts and their even share."""
    expected = labels.sum(axis=0) / k
    gaps = [np.abs(labels[folds == j].sum(axis=0) - expected) for j in range(k)]
    return float(np.mean(gaps))


class TestFolds:
    def test_rare_label_spread_over_folds(self):
        assignment = iterative_stratified_folds(rare_label_dataset(), k=2, seed=0)
        assert assignment.fold_sizes() == [5, 5]
        positives = assignment.folds[:2]
        assert sorted(positives.tolist()) == [0, 1]

    def test_partition(self):
        rng = np.random.default_rng(1)
        ds = random_dataset(rng, n=53, n_labels=5)
        assignment = iterative_stratified_folds(ds, k=5, seed=3)
        assert len(assignment) == 53
        assert sum(assignment.fold_sizes()) == 53
        seen = np.concatenate([assignment.indices(j) for j in range(5)])
        assert sorted(seen.tolist()) == list(range(53))
        train, test = assignment.train_test(2)
        assert len(train) + len(test) == 53
        assert not set(train) & set(test)

    def test_deterministic_for_seed(self):
        ds = random_dataset(np.random.default_rng(4), n=40, n_labels=4)
        first = iterative_stratified_folds(ds, k=4, seed=11)
        again = iterative_stratified_folds(ds, k=4, seed=11)
        np.testing.assert_array_equal(first.folds, again.folds)
        assert first.generator == GENERATOR

    def test_matches_iterative_stratification(self):
        ds = random_dataset(np.random.default_rng(6), n=30, n_labels=4)
        stratifier = IterativeStratification(n_splits=3, order=1)
        stratifier.random_state = 7
        expected = np.full(30, -1)
        splits = stratifier.split(np.zeros((30, 1)), ds.labels.astype(int))
        for fold, (_, test) in enumerate(splits):
            expected[test] = fold
        np.testing.assert_array_equal(iterative_stratified_folds(ds, k=3, seed=7).folds, expected)

    def test_labelsets_mode(self):
        labels = [[1, 0]] * 4 + [[0, 1]] * 4 + [[1, 1]] * 4
        assignment = iterative_stratified_folds(build_dataset(labels), k=2, seed=5, mode="labelsets")
        for start in (0, 4, 8):
            block = assignment.folds[start : start + 4]
            assert np.bincount(block, minlength=2).tolist() == [2, 2]

    def test_better_than_random_folds(self):
        rng = np.random.default_rng(99)
        stratified, shuffled = [], []
        for seed in range(20):
            ds = random_dataset(rng, n=200, n_labels=6, density=0.15)
            assignment = iterative_stratified_folds(ds, k=10, seed=seed)
            random_folds = np.random.default_rng(seed).permutation(np.arange(200) % 10)
            stratified.append(label_deviation(ds.labels, assignment.folds, 10))
            shuffled.append(label_deviation(ds.labels, random_folds, 10))
        assert np.mean(stratified) < np.mean(shuffled)

    @pytest.mark.parametrize("k", [1, 11])
    def test_bad_k(self, k):
        with pytest.raises(ContractError):
            iterative_stratified_folds(rare_label_dataset(), k=k, seed=0)

    def test_unknown_mode(self):
        with pytest.raises(ContractError, match="mode"):
            iterative_stratified_folds(rare_label_dataset(), k=2, seed=0, mode="pairs")

    def test_export_frame(self):
        frame = FoldAssignment(folds=[0, 1, 1], k=2, seed=0).to_frame()
        assert frame.columns.tolist() == ["example_index", "fold"]
        assert frame["fold"].tolist() == [0, 1, 1]

    def test_assignment_bounds(self):
        with pytest.raises(ContractError):
            FoldAssignment(folds=[0, 2], k=2, seed=0)


class TestSubsample:
    def test_keeps_label_share(self):
        selected = stratified_subsample(rare_label_dataset(positives=4), m=5, seed=0)
        assert len(selected) == 5
        assert sum(1 for i in selected if i < 4) == 2

    def test_exact_size_and_unique(self):
        rng = np.random.default_rng(8)
        for m in (1, 7, 30, 59):
            ds = random_dataset(rng, n=60, n_labels=4)
            selected = stratified_subsample(ds, m=m, seed=m)
            assert len(selected) == m
            assert len(set(selected)) == m
            assert selected == sorted(selected)
            assert all(0 <= i < 60 for i in selected)

    def test_whole_dataset(self):
        assert stratified_subsample(rare_label_dataset(), m=10, seed=0) == list(range(10))

    def test_deterministic(self):
        ds = random_dataset(np.random.default_rng(2), n=30, n_labels=3)
        assert stratified_subsample(ds, 12, seed=4) == stratified_subsample(ds, 12, seed=4)

    @pytest.mark.parametrize("m", [0, 11])
    def test_bad_size(self, m):
        with pytest.raises(ContractError):
            stratified_subsample(rare_label_dataset(), m=m, seed=0)
