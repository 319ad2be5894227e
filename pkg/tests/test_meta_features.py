"""Tests for meta-feature extraction against direct-from-definition oracles."""

import math
from collections import Counter
from itertools import combinations

import numpy as np
import pandas as pd
import pytest

from src.exceptions import ContractError, ParseError
from src.meta_features import (
    MetaFeatureExtractor,
    compute_all,
    compute_relationships,
    label_imbalance_ratios,
    load_catalogue,
    parse_catalogue,
    scumble_per_instance,
)
from tests.conftest import build_dataset, random_dataset

CHI2_CRITICAL_001 = 6.634896601021214


def _entropy(counts):
    total = sum(counts)
    return -sum(c / total * math.log2(c / total) for c in counts if c > 0)


def _population_std(values):
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def _moments(values):
    """(skewness, excess kurtosis) from population moments; 0 for constant columns."""
    if len(set(values)) < 2:
        return 0.0, 0.0
    mean = sum(values) / len(values)
    m2, m3, m4 = (sum((v - mean) ** p for v in values) / len(values) for p in (2, 3, 4))
    return m3 / m2**1.5, m4 / m2**2 - 3


def _gain_ratio(attribute, label):
    split_info = _entropy(list(Counter(attribute).values()))
    if split_info == 0:
        return 0.0
    conditional = 0.0
    for value in set(attribute):
        subset = [y for a, y in zip(attribute, label) if a == value]
        conditional += len(subset) / len(label) * _entropy(list(Counter(subset).values()))
    return max(_entropy(list(Counter(label).values())) - conditional, 0.0) / split_info


def oracle(ds, small_set_threshold=2):
    """Selected catalogue features computed cell by cell in plain Python."""
    rows = [tuple(int(v) for v in row) for row in ds.labels]
    n, n_labels, d = len(rows), len(rows[0]), ds.n_features
    counts = [sum(row[j] for row in rows) for j in range(n_labels)]
    labelsets = Counter(rows)
    n_sets = len(labelsets)
    sizes = [sum(row) for row in rows]
    card = sum(sizes) / n

    values = {
        "D.1": d,
        "D.2": n,
        "D.3": n_labels,
        "D.4": n_sets,
        "D.5": n_labels * n * d,
        "D.6": n / d,
        "D.7": d / n,
        "D.8": n_labels / n,
        "D.9": n / n_labels,
        "D.10": d / n_labels,
        "D.11": n_labels / d,
        "D.12": n_labels * n,
        "D.13": n * d,
        "D.14": n_sets / n_labels,
        "D.15": n_sets / n,
        "L.DL.G.1": card,
        "L.DL.G.2": card / n_labels,
        "L.DL.G.3": min(counts) / n,
        "L.DL.G.4": sum(_entropy([c, n - c]) for c in counts) / n_labels,
        "L.DL.G.5": max(_entropy([c, n - c]) for c in counts),
        "L.DL.G.6": _moments(sizes)[1],
        "L.DL.G.7": _moments(sizes)[0],
        "L.RL.1": n_sets / 2**n_labels,
        "L.RL.2": sum(1 for c in labelsets.values() if c == 1),
        "L.RL.5": n / n_sets,
        "L.RL.6": sum(1 for c in labelsets.values() if c <= small_set_threshold) / n_sets,
        "L.RL.7": max(labelsets.values()),
        "L.RL.9": n_sets / min(n, 2**n_labels),
    }

    top = max(counts)
    ir = {j: top / c for j, c in enumerate(counts) if c > 0}
    if ir:
        values["L.DL.I.E.1"] = sum(ir.values()) / len(ir)
        values["L.DL.I.E.2"] = max(ir.values())
        values["L.DL.I.E.3"] = _population_std(list(ir.values())) / values["L.DL.I.E.1"]
    intra = [max(c, n - c) / min(c, n - c) for c in counts if 0 < c < n]
    if intra:
        values["L.DL.I.A.1"] = sum(intra) / len(intra)
        values["L.DL.I.A.2"] = max(intra)
        values["L.DL.I.A.3"] = min(intra)
    most = max(labelsets.values())
    per_set = [most / c for c in labelsets.values()]
    values["L.DL.I.A.4"] = sum(per_set) / len(per_set)
    values["L.DL.I.A.5"] = max(per_set)

    scumble = []
    for row in rows:
        active = [ir[j] for j in range(n_labels) if row[j]]
        if not active or len(set(active)) == 1:
            scumble.append(0.0)
            continue
        geometric = math.prod(active) ** (1 / len(active))
        scumble.append(1 - geometric / (sum(active) / len(active)))
    values["L.RL.3"] = sum(scumble) / n
    mean_scumble = values["L.RL.3"]
    if mean_scumble > 0:
        values["L.RL.4"] = _population_std(scumble) / mean_scumble
    else:
        values["L.RL.4"] = 0.0
    values["L.RL.8"] = _population_std(list(labelsets.values()))

    dependent = 0
    for i, j in combinations(range(n_labels), 2):
        cells = Counter((row[i], row[j]) for row in rows)
        a, b, c, e = cells[(1, 1)], cells[(1, 0)], cells[(0, 1)], cells[(0, 0)]
        denominator = (a + b) * (c + e) * (a + c) * (b + e)
        if denominator and n * (a * e - b * c) ** 2 / denominator > CHI2_CRITICAL_001:
            dependent += 1
    values["L.RL.11"] = dependent
    values["L.RL.12"] = dependent / (n_labels * (n_labels - 1) / 2)

    numeric = [
        [v for v in ds.features[c].tolist() if not math.isnan(v)] for c in ds.numeric_columns()
    ]
    if numeric:
        means = [sum(col) / len(col) for col in numeric]
        stds = [
            math.sqrt(sum((v - m) ** 2 for v in col) / len(col)) for col, m in zip(numeric, means)
        ]
        values["A.SF.4"] = sum(means) / len(means)
        values["A.SF.5"] = sum(stds) / len(stds)
        shapes = [_moments(col) for col in numeric]
        values["A.SF.3"] = sum(s for s, _ in shapes) / len(shapes)
        values["A.SF.6"] = sum(k for _, k in shapes) / len(shapes)
    nominal = [ds.features[c].astype(str).tolist() for c in ds.nominal_columns()]
    if nominal:
        values["A.IT.1"] = sum(_entropy(list(Counter(col).values())) for col in nominal) / len(
            nominal
        )
        ratios = [
            _gain_ratio(col, [row[j] for row in rows]) for col in nominal for j in range(n_labels)
        ]
        values["A.IT.2"] = sum(ratios) / len(ratios)
    values["A.SF.1"] = len(numeric)
    values["A.SF.2"] = len(nominal)
    values["A.SF.7"] = len(numeric) / d
    return values


class TestCatalogue:
    def test_shipped_catalogue(self):
        catalogue = load_catalogue()
        assert catalogue.version == "mlc-mf-1.0"
        assert len(catalogue.entries) == 57
        assert len(catalogue.active_ids) == 50
        assert len(catalogue.with_extended().active_ids) == 57
        assert catalogue.parameters["dependence_alpha"] == 0.01

    def test_extend_selected_ids(self):
        catalogue = load_catalogue().with_extended(["L.RL.10"])
        assert "L.RL.10" in catalogue.active_ids
        assert "A.SF.8" not in catalogue.active_ids

    def test_bad_line(self):
        text = "@version x\nD.1 | D | Attributes | 1 | inf | active\n"
        with pytest.raises(ParseError) as excinfo:
            parse_catalogue(text)
        assert excinfo.value.line == 2

    def test_missing_version(self):
        with pytest.raises(ParseError, match="version"):
            parse_catalogue("D.1 | D | Attributes | 1 | inf | active | x\n")


class TestToyDataset:
    def test_selected_values(self, toy_dataset):
        vector = compute_all(toy_dataset)
        assert len(vector) == 50
        assert vector.catalogue_version == "mlc-mf-1.0"
        assert vector["D.1"] == 2
        assert vector["D.4"] == 4
        assert vector["D.15"] == pytest.approx(1.0)
        assert vector["L.DL.G.2"] == pytest.approx(0.41667, abs=1e-5)
        # IRLbl = (1, 1, 2); instance {l2,l3}: 1 - sqrt(2) / 1.5
        expected = (1 - math.sqrt(2) / 1.5) / 4
        assert vector["L.RL.3"] == pytest.approx(expected, abs=1e-12)

    def test_matches_oracle(self, toy_dataset):
        vector = compute_all(toy_dataset)
        for feature_id, value in oracle(toy_dataset).items():
            if feature_id in vector.values:
                assert vector[feature_id] == pytest.approx(value, abs=1e-9), feature_id

    def test_test_part_rejected(self, toy_dataset):
        test_part = toy_dataset.subset(range(4), role="test")
        with pytest.raises(ContractError, match="training data only"):
            compute_all(test_part)


class TestDimensionality:
    def test_abpm_shape(self, loader, abpm_arff):
        vector = compute_all(loader.load_dataset(abpm_arff, 6, role="train"))
        assert vector["D.1"] == 33
        assert vector["D.5"] == 37422
        assert vector["D.6"] == pytest.approx(5.727, abs=1e-3)


class TestRelationships:
    def test_perfectly_cooccurring_pair(self):
        labels = np.array([[1, 1]] * 20 + [[0, 0]] * 20)
        vector = compute_relationships(build_dataset(labels))
        assert vector["L.RL.11"] == 1
        assert vector["L.RL.12"] == 1.0

    def test_alpha_range(self, toy_dataset):
        with pytest.raises(ContractError):
            compute_relationships(toy_dataset, dependence_alpha=1.5)

    def test_imbalance_ratios(self):
        ratios = label_imbalance_ratios(np.array([[1, 0, 0], [1, 1, 0], [1, 1, 0], [1, 0, 0]]))
        assert ratios[0] == 1.0
        assert ratios[1] == 2.0
        assert np.isnan(ratios[2])

    def test_constant_label_diagnostics(self):
        vector = compute_all(build_dataset([[1, 0], [1, 1], [1, 0]]))
        assert any("constant" in message for message in vector.diagnostics)


class TestRandomDatasets:
    def test_matches_oracle(self):
        rng = np.random.default_rng(2024)
        catalogue = load_catalogue().with_extended()
        for _ in range(200):
            ds = random_dataset(
                rng,
                n=int(rng.integers(2, 31)),
                n_labels=int(rng.integers(2, 6)),
                n_features=int(rng.integers(1, 5)),
                density=float(rng.uniform(0.1, 0.7)),
            )
            vector = compute_all(ds, catalogue)
            for feature_id, value in oracle(ds).items():
                assert vector[feature_id] == pytest.approx(value, rel=1e-9, abs=1e-9), feature_id

    def test_range_invariants(self):
        rng = np.random.default_rng(7)
        catalogue = load_catalogue()
        for _ in range(1000):
            ds = random_dataset(
                rng,
                n=int(rng.integers(1, 31)),
                n_labels=int(rng.integers(2, 6)),
                n_features=int(rng.integers(1, 5)),
                density=float(rng.uniform(0.05, 0.9)),
            )
            vector = compute_all(ds, catalogue)
            for feature_id in catalogue.active_ids:
                entry = catalogue.entry(feature_id)
                assert entry.lower - 1e-9 <= vector[feature_id] <= entry.upper + 1e-9, feature_id
            scumble = scumble_per_instance(ds.labels)
            assert np.all((scumble >= 0) & (scumble <= 1))
            ratios = label_imbalance_ratios(ds.labels)
            assert np.all(ratios[~np.isnan(ratios)] >= 1)


class TestExtractor:
    def test_matrix_and_document(self, toy_dataset):
        other = build_dataset([[1, 0], [0, 1], [1, 1]], name="other")
        extractor = MetaFeatureExtractor(small_set_threshold=1)
        matrix, diagnostics = extractor.extract_many([toy_dataset, other])
        assert matrix.index.tolist() == ["other", "toy"]
        assert matrix.shape == (2, 50)
        document = extractor.to_json_document(matrix, diagnostics)
        assert document["catalogue"]["parameters"]["small_set_threshold"] == 1
        assert len(document["catalogue"]["features"]) == 50
        assert set(document["datasets"]) == {"other", "toy"}

    def test_duplicate_names(self, toy_dataset):
        with pytest.raises(ContractError, match="unique"):
            MetaFeatureExtractor().extract_many([toy_dataset, toy_dataset])

    def test_missing_values_counted(self, toy_dataset):
        catalogue = load_catalogue().with_extended(["A.SF.11"])
        vector = compute_all(toy_dataset, catalogue)
        assert vector["A.SF.11"] == pytest.approx(1 / 8)
        assert isinstance(vector.to_series(), pd.Series)


# grow with N under duplication (x2) or shrink (x0.5)
DOUBLED = ("D.2", "D.5", "D.6", "D.9", "D.12", "D.13", "L.RL.5", "L.RL.7", "L.RL.8")
HALVED = ("D.7", "D.8", "D.15")
# labelset counts cross the singleton/small-set/bound cut-offs, chi-square doubles
COUNT_DEPENDENT = ("L.RL.2", "L.RL.6", "L.RL.9", "L.RL.11", "L.RL.12")


class TestInvariance:
    @staticmethod
    def _datasets(seed, count=50):
        rng = np.random.default_rng(seed)
        for _ in range(count):
            yield rng, random_dataset(
                rng,
                n=int(rng.integers(3, 25)),
                n_labels=int(rng.integers(2, 6)),
                n_features=int(rng.integers(1, 5)),
                density=float(rng.uniform(0.1, 0.7)),
            )

    def test_example_order(self):
        for rng, ds in self._datasets(41):
            shuffled = ds.subset(rng.permutation(ds.n_instances))
            original, permuted = compute_all(ds), compute_all(shuffled)
            for feature_id, value in original.values.items():
                assert permuted[feature_id] == pytest.approx(value, rel=1e-9, abs=1e-12), feature_id

    def test_label_order(self):
        for rng, ds in self._datasets(43):
            order = rng.permutation(ds.n_labels)
            reordered = build_dataset(ds.labels[:, order], ds.features, name=ds.name)
            original, permuted = compute_all(ds), compute_all(reordered)
            for feature_id, value in original.values.items():
                assert permuted[feature_id] == pytest.approx(value, rel=1e-9, abs=1e-12), feature_id

    def test_duplicated_examples(self):
        for _, ds in self._datasets(47):
            doubled = ds.subset(list(range(ds.n_instances)) * 2)
            original, twice = compute_all(ds), compute_all(doubled)
            for feature_id, value in original.values.items():
                if feature_id in COUNT_DEPENDENT:
                    continue
                factor = 2.0 if feature_id in DOUBLED else 0.5 if feature_id in HALVED else 1.0
                assert twice[feature_id] == pytest.approx(
                    factor * value, rel=1e-9, abs=1e-12
                ), feature_id
            assert twice["D.2"] == 2 * original["D.2"]
            assert twice["D.5"] == 2 * original["D.5"]
