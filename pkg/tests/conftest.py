"""Shared fixtures for the test suite."""

from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
import pytest

from src.data_loader import NOMINAL, NUMERIC, DataLoader, MlcDataset, ResultsTable
from src.registry import load_registry

FIXTURES = Path(__file__).parent / "fixtures"


def build_dataset(
    labels,
    features: Optional[pd.DataFrame] = None,
    name: str = "toy",
    role: str = "train",
) -> MlcDataset:
    """MlcDataset from a label matrix; one numeric feature 0..N-1 unless given."""
    labels = np.asarray(labels, dtype=np.uint8)
    if features is None:
        features = pd.DataFrame({"x": np.arange(labels.shape[0], dtype=float)})
    types = tuple(
        NOMINAL if isinstance(features[c].dtype, pd.CategoricalDtype) else NUMERIC
        for c in features.columns
    )
    return MlcDataset(
        name=name,
        features=features,
        labels=labels,
        feature_types=types,
        label_names=tuple(f"l{j + 1}" for j in range(labels.shape[1])),
        role=role,
    )


def random_dataset(
    rng: np.random.Generator, n: int, n_labels: int, n_features: int = 2, density: float = 0.3
) -> MlcDataset:
    """Random dataset with numeric columns and, from the third column on, nominal ones."""
    columns = {}
    for c in range(n_features):
        if c >= 2:
            codes = rng.integers(0, 3, size=n)
            columns[f"f{c}"] = pd.Categorical(
                np.array(["a", "b", "c"])[codes], categories=["a", "b", "c"]
            )
        else:
            columns[f"f{c}"] = rng.normal(size=n).round(3)
    labels = (rng.random((n, n_labels)) < density).astype(np.uint8)
    return build_dataset(labels, pd.DataFrame(columns), name="random")


def make_results(
    rows: Iterable[Tuple], success: Optional[Iterable[Tuple]] = None
) -> ResultsTable:
    """ResultsTable from (dataset, method, measure, score[, setting]) tuples."""
    rows = list(rows)
    columns = ["dataset", "method", "measure", "score"]
    if rows and len(rows[0]) == 5:
        columns.append("setting")
    scores = pd.DataFrame(rows, columns=columns)
    if success is None:
        return ResultsTable(scores)
    log = pd.DataFrame(list(success), columns=["dataset", "method", "attempted", "finished"])
    return ResultsTable(scores, log)


def write_abpm_like(path: Path, seed: int = 7) -> Path:
    """ARFF with ABPM's training shape: 189 instances, 33 numeric attributes, 6 labels, 750 positives."""
    rng = np.random.default_rng(seed)
    n, d, n_labels = 189, 33, 6
    labels = np.zeros(n * n_labels, dtype=int)
    labels[rng.permutation(n * n_labels)[:750]] = 1
    labels = labels.reshape(n, n_labels)
    features = rng.normal(size=(n, d)).round(4)
    lines = ["@relation abpm", ""]
    lines += [f"@attribute a{j} numeric" for j in range(d)]
    lines += [f"@attribute y{j} {{0,1}}" for j in range(n_labels)]
    lines += ["", "@data"]
    for i in range(n):
        values = [f"{v:g}" for v in features[i]] + [str(v) for v in labels[i]]
        lines.append(",".join(values))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def registry():
    return load_registry()


@pytest.fixture
def loader():
    return DataLoader()


@pytest.fixture
def toy_dataset():
    """Labelsets {l1}, {l1,l2}, {l2,l3}, {} over one numeric and one nominal attribute."""
    features = pd.DataFrame(
        {
            "x": [1.0, 2.5, np.nan, 4.0],
            "colour": pd.Categorical(["red", "green", "red", "green"], categories=["red", "green"]),
        }
    )
    labels = [[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 0]]
    return build_dataset(labels, features)


@pytest.fixture
def meta_matrix(loader):
    return loader.load_meta_matrix(FIXTURES / "meta.csv")


@pytest.fixture
def results(loader):
    return loader.load_results(FIXTURES / "results.csv", FIXTURES / "success.csv")


@pytest.fixture
def abpm_arff(tmp_path):
    return write_abpm_like(tmp_path / "abpm_train.arff")
