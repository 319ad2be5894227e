"""
Meta-feature extraction module for multi-label datasets.

Computes the catalogue of dataset descriptors: dimensionality (D), statistics
and information content of the attributes (A.SF, A.IT), label distribution
(L.DL.G), inter- and intra-class imbalance (L.DL.I.E, L.DL.I.A) and label
relationships (L.RL).

Moments use population normalization and kurtosis is excess (Fisher)
kurtosis. Degenerate cases map to sentinel values and are reported in the
diagnostics of the returned vector.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from .data_loader import MlcDataset
from .exceptions import ContractError, ParseError

logger = logging.getLogger(__name__)

DEFAULT_CATALOGUE = Path(__file__).parent / "resources" / "meta_feature_catalogue.txt"
GROUPS = ("D", "A.SF", "A.IT", "L.DL.G", "L.DL.I.A", "L.DL.I.E", "L.RL")


@dataclass(frozen=True)
class CatalogueEntry:
    id: str
    group: str
    name: str
    lower: float
    upper: float
    status: str
    provenance: str

    @property
    def active(self) -> bool:
        return self.status == "active"

    def to_dict(self) -> Dict:
        return {
            "id": self.id,
            "group": self.group,
            "name": self.name,
            "range": [_bound_text(self.lower), _bound_text(self.upper)],
            "status": self.status,
            "provenance": self.provenance,
        }


def _bound_text(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@dataclass(frozen=True)
class FeatureCatalogue:
    """Versioned list of meta-feature definitions and their parameters."""

    version: str
    entries: Tuple[CatalogueEntry, ...]
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ParseError("duplicate feature identifiers in catalogue")
        groups = {e.group for e in self.entries}
        empty = [g for g in GROUPS if g not in groups]
        if empty:
            raise ParseError(f"catalogue groups without features: {empty}")

    @property
    def active_ids(self) -> List[str]:
        return [e.id for e in self.entries if e.active]

    def entry(self, feature_id: str) -> CatalogueEntry:
        for e in self.entries:
            if e.id == feature_id:
                return e
        raise KeyError(feature_id)

    def with_extended(self, ids: Optional[Iterable[str]] = None) -> "FeatureCatalogue":
        """Copy with extended features switched on (all of them when ids is None)."""
        wanted = None if ids is None else set(ids)
        entries = tuple(
            replace(e, status="active") if wanted is None or e.id in wanted else e
            for e in self.entries
        )
        return replace(self, entries=entries)

    def to_dict(self) -> Dict:
        return {
            "version": self.version,
            "parameters": dict(sorted(self.parameters.items())),
            "features": [e.to_dict() for e in self.entries if e.active],
        }


def parse_catalogue(text: str, source: str = "<catalogue>") -> FeatureCatalogue:
    """Parse catalogue text (see resources/meta_feature_catalogue.txt)."""
    version = None
    parameters: Dict[str, float] = {}
    entries = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@version"):
            version = line[len("@version") :].strip()
            continue
        if line.startswith("@param"):
            body = line[len("@param") :]
            if "=" not in body:
                raise ParseError("expected '@param <name> = <value>'", line_no, source)
            key, value = (p.strip() for p in body.split("=", 1))
            try:
                parameters[key] = float(value)
            except ValueError:
                raise ParseError(f"non-numeric parameter '{value}'", line_no, source)
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 7:
            raise ParseError(f"expected 7 fields, found {len(fields)}", line_no, source)
        feature_id, group, name, lower, upper, status, provenance = fields
        if group not in GROUPS or not feature_id.startswith(group + "."):
            raise ParseError(f"bad group '{group}' for '{feature_id}'", line_no, source)
        if status not in ("active", "extended"):
            raise ParseError(f"bad status '{status}'", line_no, source)
        try:
            bounds = float(lower), float(upper)
        except ValueError:
            raise ParseError("non-numeric range bound", line_no, source)
        entries.append(CatalogueEntry(feature_id, group, name, bounds[0], bounds[1], status, provenance))
    if version is None:
        raise ParseError("catalogue has no @version line", None, source)
    return FeatureCatalogue(version=version, entries=tuple(entries), parameters=parameters)


def load_catalogue(filepath: Optional[Union[str, Path]] = None) -> FeatureCatalogue:
    """Load a catalogue file (the shipped one when no path is given)."""
    path = Path(filepath) if filepath else DEFAULT_CATALOGUE
    return parse_catalogue(path.read_text(encoding="utf-8"), source=path.name)


@dataclass(frozen=True)
class MetaFeatureVector:
    """Ordered mapping of feature id -> value for one dataset."""

    values: Dict[str, float]
    dataset: str
    catalogue_version: Optional[str] = None
    diagnostics: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, feature_id: str) -> float:
        return self.values[feature_id]

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, name=self.dataset, dtype=float)


def _moment_stats(values: np.ndarray) -> Tuple[float, float, float, float]:
    """(mean, std, skewness, kurtosis) with zero-variance sentinels."""
    mean = float(np.mean(values))
    std = float(np.std(values))
    if len(values) < 2 or np.all(values == values[0]):
        return mean, 0.0, 0.0, 0.0
    skewness = float(stats.skew(values, bias=True))
    kurtosis = float(stats.kurtosis(values, fisher=True, bias=True))
    if not np.isfinite(skewness):
        skewness = 0.0
    if not np.isfinite(kurtosis):
        kurtosis = 0.0
    return mean, std, skewness, kurtosis


def _entropy(counts: Sequence[float]) -> float:
    """Base-2 entropy of a frequency vector; 0 for constant variables."""
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    if len(counts) < 2:
        return 0.0
    return float(stats.entropy(counts, base=2))


def _gain_ratio(attribute_codes: np.ndarray, label: np.ndarray) -> float:
    """Information gain of a binary label over a nominal attribute / attribute entropy."""
    categories, inverse = np.unique(attribute_codes, return_inverse=True)
    split_info = _entropy(np.bincount(inverse))
    if split_info == 0.0:
        return 0.0
    n = len(label)
    conditional = 0.0
    for v in range(len(categories)):
        subset = label[inverse == v]
        conditional += len(subset) / n * _entropy(np.bincount(subset, minlength=2))
    gain = _entropy(np.bincount(label, minlength=2)) - conditional
    return max(gain, 0.0) / split_info


def label_imbalance_ratios(labels: np.ndarray) -> np.ndarray:
    """IRLbl per label (NaN for labels without positives)."""
    counts = labels.sum(axis=0).astype(float)
    ratios = np.full(len(counts), np.nan)
    positive = counts > 0
    if positive.any():
        ratios[positive] = counts.max() / counts[positive]
    return ratios


def _coefficient_of_variation(values: np.ndarray) -> float:
    mean = float(np.mean(values))
    if mean == 0.0:
        return 0.0
    return float(np.std(values)) / mean


def compute_dimensionality(ds: MlcDataset) -> MetaFeatureVector:
    """
    Dimensionality meta features (group D).

    Parameters
    ----------
    ds : MlcDataset
        Training data

    Returns
    -------
    MetaFeatureVector
        Partial vector with D.1 - D.15
    """
    d = float(ds.n_features)
    n = float(ds.n_instances)
    n_labels = float(ds.n_labels)
    labelsets = float(len(ds.labelset_counts()))
    values = {
        "D.1": d,
        "D.2": n,
        "D.3": n_labels,
        "D.4": labelsets,
        "D.5": n_labels * n * d,
        "D.6": n / d,
        "D.7": d / n,
        "D.8": n_labels / n,
        "D.9": n / n_labels,
        "D.10": d / n_labels,
        "D.11": n_labels / d,
        "D.12": n_labels * n,
        "D.13": n * d,
        "D.14": labelsets / n_labels,
        "D.15": labelsets / n,
    }
    return MetaFeatureVector(values, ds.name)


def compute_attribute_stats(ds: MlcDataset) -> MetaFeatureVector:
    """
    Statistical (A.SF) and information-theoretic (A.IT) attribute features.

    A.IT.2 is the mean over labels of the mean gain ratio of every nominal
    attribute with respect to that label.

    Parameters
    ----------
    ds : MlcDataset
        Training data

    Returns
    -------
    MetaFeatureVector
        Partial vector with A.SF.* and A.IT.*
    """
    diagnostics = []
    numeric = ds.numeric_columns()
    nominal = ds.nominal_columns()
    n = float(ds.n_instances)
    d = float(ds.n_features)

    moments = []
    for column in numeric:
        values = ds.features[column].to_numpy(dtype=float)
        values = values[~np.isnan(values)]
        if len(values) == 0:
            diagnostics.append(f"numeric attribute '{column}' has no observed values")
            continue
        moments.append(_moment_stats(values))
    if moments:
        means, stds, skews, kurts = (float(np.mean(col)) for col in zip(*moments))
    else:
        means = stds = skews = kurts = 0.0
        diagnostics.append("no numeric attributes: A.SF.3-A.SF.6 set to 0")

    entropies = []
    gain_ratios = []
    for column in nominal:
        codes = ds.features[column].cat.codes.to_numpy()
        observed = codes >= 0
        if not observed.any():
            diagnostics.append(f"nominal attribute '{column}' has no observed values")
            continue
        entropies.append(_entropy(np.bincount(codes[observed])))
        gain_ratios.append(
            [_gain_ratio(codes[observed], ds.labels[observed, j].astype(int)) for j in range(ds.n_labels)]
        )
    if entropies:
        mean_entropy = float(np.mean(entropies))
        # attributes x labels -> mean over attributes per label, then over labels
        mean_gain_ratio = float(np.mean(np.mean(np.array(gain_ratios), axis=0)))
    else:
        mean_entropy = mean_gain_ratio = 0.0
        diagnostics.append("no nominal attributes: A.IT.1 and A.IT.2 set to 0")

    missing = float(ds.features.isna().to_numpy().sum()) / (n * d)
    values = {
        "A.SF.1": float(len(numeric)),
        "A.SF.2": float(len(nominal)),
        "A.SF.3": skews,
        "A.SF.4": means,
        "A.SF.5": stds,
        "A.SF.6": kurts,
        "A.SF.7": len(numeric) / d,
        "A.SF.8": len(nominal) / d,
        "A.SF.9": len(numeric) / n,
        "A.SF.10": len(nominal) / n,
        "A.SF.11": missing,
        "A.IT.1": mean_entropy,
        "A.IT.2": mean_gain_ratio,
    }
    return MetaFeatureVector(values, ds.name, diagnostics=tuple(diagnostics))


def compute_label_distribution(ds: MlcDataset) -> MetaFeatureVector:
    """
    General label-distribution features (L.DL.G).

    Parameters
    ----------
    ds : MlcDataset
        Training data

    Returns
    -------
    MetaFeatureVector
        Partial vector with L.DL.G.*
    """
    n = ds.n_instances
    sizes = ds.labels.sum(axis=1).astype(float)
    counts = ds.labels.sum(axis=0).astype(float)
    frequencies = counts / n
    entropies = np.array([_entropy([c, n - c]) for c in counts])
    _, _, skewness, kurtosis = _moment_stats(sizes)
    cardinality = float(sizes.mean())
    values = {
        "L.DL.G.1": cardinality,
        "L.DL.G.2": cardinality / ds.n_labels,
        "L.DL.G.3": float(frequencies.min()),
        "L.DL.G.4": float(entropies.mean()),
        "L.DL.G.5": float(entropies.max()),
        "L.DL.G.6": kurtosis,
        "L.DL.G.7": skewness,
        "L.DL.G.8": float(frequencies.max()),
        "L.DL.G.9": float(frequencies.mean()),
    }
    return MetaFeatureVector(values, ds.name)


def compute_imbalance(ds: MlcDataset) -> MetaFeatureVector:
    """
    Inter-class (L.DL.I.E) and intra-class (L.DL.I.A) imbalance features.

    Labels without positives have no IRLbl; they are excluded from the
    aggregates and listed in the diagnostics.

    Parameters
    ----------
    ds : MlcDataset
        Training data

    Returns
    -------
    MetaFeatureVector
        Partial vector with L.DL.I.E.* and L.DL.I.A.*
    """
    diagnostics = []
    n = ds.n_instances
    counts = ds.labels.sum(axis=0).astype(float)

    ratios = label_imbalance_ratios(ds.labels)
    for name in np.asarray(ds.label_names)[np.isnan(ratios)]:
        diagnostics.append(f"label '{name}' has no positive examples: IRLbl undefined")
    defined = ratios[~np.isnan(ratios)]
    if len(defined):
        inter = (float(defined.mean()), float(defined.max()), _coefficient_of_variation(defined))
    else:
        inter = (1.0, 1.0, 0.0)
        diagnostics.append("no label has positive examples: inter-class IR set to 1")

    intra = []
    for name, count in zip(ds.label_names, counts):
        if count == 0 or count == n:
            diagnostics.append(f"label '{name}' is constant: intra-class IR undefined")
            continue
        intra.append(max(count, n - count) / min(count, n - count))
    intra = np.array(intra)
    if len(intra):
        intra_stats = (float(intra.mean()), float(intra.max()), float(intra.min()))
    else:
        intra_stats = (1.0, 1.0, 1.0)
        diagnostics.append("every label is constant: intra-class IR set to 1")

    labelset_counts = ds.labelset_counts().astype(float)
    per_labelset = labelset_counts.max() / labelset_counts

    values = {
        "L.DL.I.E.1": inter[0],
        "L.DL.I.E.2": inter[1],
        "L.DL.I.E.3": inter[2],
        "L.DL.I.A.1": intra_stats[0],
        "L.DL.I.A.2": intra_stats[1],
        "L.DL.I.A.3": intra_stats[2],
        "L.DL.I.A.4": float(per_labelset.mean()),
        "L.DL.I.A.5": float(per_labelset.max()),
    }
    return MetaFeatureVector(values, ds.name, diagnostics=tuple(diagnostics))


def scumble_per_instance(labels: np.ndarray) -> np.ndarray:
    """SCUMBLE score of every instance (0 for empty labelsets)."""
    ratios = label_imbalance_ratios(labels)
    scores = np.zeros(labels.shape[0])
    for i, row in enumerate(labels):
        active = ratios[row.astype(bool)]
        if len(active) == 0 or np.all(active == active[0]):
            continue
        geometric = float(np.exp(np.mean(np.log(active))))
        scores[i] = min(max(1.0 - geometric / float(np.mean(active)), 0.0), 1.0)
    return scores


def label_pair_chi_square(labels: np.ndarray) -> np.ndarray:
    """Chi-square statistics of all label pairs (i < j), row-major order.

    Pairs where either label is constant get NaN.
    """
    y = labels.astype(float)
    n = float(y.shape[0])
    counts = y.sum(axis=0)
    both = y.T @ y
    statistics = []
    n_labels = y.shape[1]
    for i in range(n_labels):
        for j in range(i + 1, n_labels):
            denominator = counts[i] * (n - counts[i]) * counts[j] * (n - counts[j])
            if denominator == 0:
                statistics.append(np.nan)
                continue
            n11 = both[i, j]
            n10 = counts[i] - n11
            n01 = counts[j] - n11
            n00 = n - counts[i] - counts[j] + n11
            statistics.append(n * (n11 * n00 - n10 * n01) ** 2 / denominator)
    return np.array(statistics)


def compute_relationships(
    ds: MlcDataset, dependence_alpha: float = 0.01, small_set_threshold: int = 2
) -> MetaFeatureVector:
    """
    Label-relationship features (L.RL): SCUMBLE, labelset statistics and
    chi-square pairwise dependence.

    Parameters
    ----------
    ds : MlcDataset
        Training data
    dependence_alpha : float
        Significance level of the 1-dof chi-square independence test
    small_set_threshold : int
        Labelsets with at most this many examples count towards L.RL.6

    Returns
    -------
    MetaFeatureVector
        Partial vector with L.RL.*
    """
    if not 0.0 < dependence_alpha < 1.0:
        raise ContractError(f"dependence_alpha must lie in (0, 1), got {dependence_alpha}")
    if small_set_threshold < 0:
        raise ContractError("small_set_threshold must be non-negative")
    diagnostics = []
    n = ds.n_instances
    n_labels = ds.n_labels

    instance_scores = scumble_per_instance(ds.labels)
    scumble = float(instance_scores.mean())
    scumble_cv = float(np.std(instance_scores)) / scumble if scumble > 0 else 0.0

    labelset_counts = ds.labelset_counts().astype(float)
    n_labelsets = len(labelset_counts)
    bound = min(n, 2**n_labels)

    chi_square = label_pair_chi_square(ds.labels)
    constant_pairs = int(np.isnan(chi_square).sum())
    if constant_pairs:
        diagnostics.append(f"{constant_pairs} label pairs involve a constant label: not dependent")
    critical = float(stats.chi2.ppf(1.0 - dependence_alpha, df=1))
    dependent = int(np.sum(np.nan_to_num(chi_square, nan=0.0) > critical))
    n_pairs = n_labels * (n_labels - 1) / 2
    phi = np.sqrt(np.nan_to_num(chi_square, nan=0.0) / n)

    values = {
        "L.RL.1": math.ldexp(float(n_labelsets), -n_labels),
        "L.RL.2": float(np.sum(labelset_counts == 1)),
        "L.RL.3": scumble,
        "L.RL.4": scumble_cv,
        "L.RL.5": n / n_labelsets,
        "L.RL.6": float(np.mean(labelset_counts <= small_set_threshold)),
        "L.RL.7": float(labelset_counts.max()),
        "L.RL.8": float(np.std(labelset_counts)),
        "L.RL.9": n_labelsets / bound,
        "L.RL.10": float(np.clip(phi, 0.0, 1.0).mean()),
        "L.RL.11": float(dependent),
        "L.RL.12": dependent / n_pairs,
    }
    return MetaFeatureVector(values, ds.name, diagnostics=tuple(diagnostics))


def compute_all(
    train: MlcDataset,
    catalogue: Optional[FeatureCatalogue] = None,
    dependence_alpha: Optional[float] = None,
    small_set_threshold: Optional[int] = None,
) -> MetaFeatureVector:
    """
    Compute every active catalogue feature for a training dataset.

    Parameters
    ----------
    train : MlcDataset
        Training part (meta features are never computed on test data)
    catalogue : FeatureCatalogue, optional
        Active catalogue; the shipped one by default
    dependence_alpha, small_set_threshold : optional
        Override the catalogue parameters

    Returns
    -------
    MetaFeatureVector
        Values in catalogue order, with diagnostics
    """
    if train.role == "test":
        raise ContractError(f"{train.name}: meta features are computed on training data only")
    catalogue = catalogue or load_catalogue()
    if dependence_alpha is None:
        dependence_alpha = catalogue.parameters.get("dependence_alpha", 0.01)
    if small_set_threshold is None:
        small_set_threshold = int(catalogue.parameters.get("small_set_threshold", 2))

    logger.info(f"Computing meta features for {train.name}")
    parts = [
        compute_dimensionality(train),
        compute_attribute_stats(train),
        compute_label_distribution(train),
        compute_imbalance(train),
        compute_relationships(train, dependence_alpha, int(small_set_threshold)),
    ]
    computed: Dict[str, float] = {}
    diagnostics: List[str] = []
    for part in parts:
        computed.update(part.values)
        diagnostics.extend(part.diagnostics)

    values = {}
    for feature_id in catalogue.active_ids:
        if feature_id not in computed:
            raise ContractError(f"catalogue feature '{feature_id}' has no implementation")
        value = computed[feature_id]
        if not np.isfinite(value):
            diagnostics.append(f"{feature_id} is not finite: set to 0")
            value = 0.0
        entry = catalogue.entry(feature_id)
        if not entry.lower - 1e-9 <= value <= entry.upper + 1e-9:
            diagnostics.append(f"{feature_id}={value} outside declared range")
        values[feature_id] = float(value)

    for message in diagnostics:
        logger.warning(f"{train.name}: {message}")
    return MetaFeatureVector(values, train.name, catalogue.version, tuple(diagnostics))


class MetaFeatureExtractor:
    """Extract catalogue meta features for one or more datasets."""

    def __init__(
        self,
        catalogue: Optional[FeatureCatalogue] = None,
        dependence_alpha: Optional[float] = None,
        small_set_threshold: Optional[int] = None,
    ):
        """
        Initialize extractor.

        Parameters
        ----------
        catalogue : FeatureCatalogue, optional
            Catalogue to use (shipped default otherwise)
        dependence_alpha : float, optional
            Chi-square significance level override
        small_set_threshold : int, optional
            L.RL.6 threshold override
        """
        self.catalogue = catalogue or load_catalogue()
        self.dependence_alpha = dependence_alpha
        self.small_set_threshold = small_set_threshold

    @property
    def parameters(self) -> Dict[str, float]:
        params = dict(self.catalogue.parameters)
        if self.dependence_alpha is not None:
            params["dependence_alpha"] = self.dependence_alpha
        if self.small_set_threshold is not None:
            params["small_set_threshold"] = self.small_set_threshold
        return params

    def extract(self, train: MlcDataset) -> MetaFeatureVector:
        return compute_all(
            train, self.catalogue, self.dependence_alpha, self.small_set_threshold
        )

    def extract_many(
        self, datasets: Iterable[MlcDataset]
    ) -> Tuple[pd.DataFrame, Dict[str, Tuple[str, ...]]]:
        """
        Meta-feature matrix for several datasets.

        Returns
        -------
        Tuple[pd.DataFrame, dict]
            (matrix indexed by dataset name in catalogue column order,
            diagnostics per dataset)
        """
        vectors = [self.extract(ds) for ds in datasets]
        names = [v.dataset for v in vectors]
        if len(names) != len(set(names)):
            raise ContractError("dataset names must be unique in a meta-feature matrix")
        matrix = pd.DataFrame(
            [v.values for v in vectors], index=pd.Index(names, name="dataset"),
            columns=self.catalogue.active_ids,
        ).sort_index()
        return matrix, {v.dataset: v.diagnostics for v in vectors}

    def to_json_document(self, matrix: pd.DataFrame, diagnostics: Dict[str, Tuple[str, ...]]) -> Dict:
        """JSON form of a meta-feature matrix with catalogue metadata."""
        catalogue = self.catalogue.to_dict()
        catalogue["parameters"] = dict(sorted(self.parameters.items()))
        return {
            "catalogue": catalogue,
            "datasets": {
                name: {k: float(v) for k, v in row.items()} for name, row in matrix.iterrows()
            },
            "diagnostics": {name: list(diagnostics.get(name, ())) for name in matrix.index},
        }
